"""Test matrices: randsvd-style symmetric matrices with a prescribed spectrum,
banded matrices built from local rotations, MatrixMarket ingestion and the
binary fixture format used to pin generated matrices to disk."""

from pathlib import Path
from typing import Literal, Optional

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from util import get_logger
from .apis.parse_matrix_market import matrix_market_reader
from .fpcore import DwArray, dw_matmul
from .matgen_constant import *

logger = get_logger(__name__)


class GeneratorSpecError(ValueError): pass


class FixtureFormatError(ValueError): pass


class GenSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n: int = Field(ge=2)
    cond: float = Field(ge=1.0, allow_inf_nan=False)
    mode: Literal["geometric", "one-large", "one-small", "arithmetic"] = DEFAULT_MODE
    seed: int = Field(default=1, ge=0, lt=2 ** 64)
    kind: Literal["dense-sym", "banded", "from-file"] = DEFAULT_KIND
    bandwidth: int = Field(default=1, ge=0)
    path: Optional[str] = None

    @model_validator(mode="after")
    def _kind_fields(self):
        if self.kind == "banded" and self.bandwidth >= self.n:
            raise ValueError(f"bandwidth {self.bandwidth} must be < n = {self.n}")
        if self.kind == "from-file" and not self.path:
            raise ValueError("kind 'from-file' needs a path")
        return self


def make_spec(**kwargs):
    try:
        return GenSpec(**kwargs)
    except ValidationError as e:
        raise GeneratorSpecError(str(e)) from e


def _rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


def intended_spectrum(n, cond, mode=DEFAULT_MODE):
    """Eigenvalues in ascending order, largest equal to 1."""
    if cond < 1:
        raise GeneratorSpecError(f"cond must be >= 1, got {cond!r}")
    i = np.arange(n, dtype=np.float64)
    if mode == "geometric":
        lam = cond ** (-i / (n - 1))
    elif mode == "one-large":
        lam = np.full(n, 1.0 / cond)
        lam[0] = 1.0
    elif mode == "one-small":
        lam = np.ones(n)
        lam[-1] = 1.0 / cond
    elif mode == "arithmetic":
        lam = 1.0 - (1.0 - 1.0 / cond) * i / (n - 1)
    else:
        raise GeneratorSpecError(f"unknown mode {mode!r}, expected one of {MODES}")
    return np.sort(lam)


def random_orthogonal(n, rng):
    """Haar-distributed orthogonal matrix: QR of a Gaussian with the signs of diag(R) folded into Q."""
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    return Q * signs[None, :]


def symmetrize(A):
    """(A + A^T) / 2, bit-for-bit symmetric since floating-point addition commutes."""
    return (A + A.T) * 0.5


def randsvd_sym(spec):
    """Symmetric A = Q diag(lam) Q^T with lam = intended_spectrum(spec), deterministic per seed."""
    if not isinstance(spec, GenSpec):
        spec = make_spec(**dict(spec))
    lam = intended_spectrum(spec.n, spec.cond, spec.mode)
    Q = random_orthogonal(spec.n, _rng(spec.seed))
    if spec.n <= DW_FORMATION_LIMIT:
        A = dw_matmul(DwArray(Q) * lam[None, :], Q.T).to_float()
    else:
        logger.info(f"n = {spec.n} > {DW_FORMATION_LIMIT}: forming Q D Q^T in working precision")
        A = (Q * lam[None, :]) @ Q.T
    A = symmetrize(A)
    logger.debug(f"randsvd_sym n={spec.n} cond={spec.cond:.1e} mode={spec.mode} seed={spec.seed}")
    return A


def _rotate_layer(A, start, rng):
    """Apply G A G^T for disjoint rotations in the planes (i, i+1), i = start, start+2, ..."""
    i = np.arange(start, A.shape[0] - 1, 2)
    if i.size == 0:
        return A
    j = i + 1
    theta = rng.uniform(0.0, 2.0 * np.pi, size=i.size)
    c, s = np.cos(theta), np.sin(theta)
    Ai, Aj = A[i, :].copy(), A[j, :].copy()
    A[i, :] = c[:, None] * Ai - s[:, None] * Aj
    A[j, :] = s[:, None] * Ai + c[:, None] * Aj
    Ai, Aj = A[:, i].copy(), A[:, j].copy()
    A[:, i] = Ai * c[None, :] - Aj * s[None, :]
    A[:, j] = Ai * s[None, :] + Aj * c[None, :]
    return A


def banded_sym(n, bandwidth, cond, seed=1, mode=DEFAULT_MODE):
    """Symmetric CSR matrix of half-bandwidth <= bandwidth with spectrum close to intended_spectrum.

    Each layer of disjoint adjacent-plane rotations widens the band by at most one,
    so ``bandwidth`` layers applied to a diagonal stay inside the band.
    """
    if not 0 <= bandwidth < n:
        raise GeneratorSpecError(f"bandwidth must satisfy 0 <= bandwidth < n = {n}, got {bandwidth}")
    A = np.diag(intended_spectrum(n, cond, mode))
    rng = _rng(seed)
    for layer in range(bandwidth):
        A = _rotate_layer(A, layer % 2, rng)
    A = symmetrize(A)
    rows, cols = np.indices(A.shape)
    A[np.abs(rows - cols) > bandwidth] = 0.0
    return sp.csr_matrix(A)


def load_matrix_market(path):
    return matrix_market_reader.read(path)


def generate(spec):
    if spec.kind == "dense-sym":
        return randsvd_sym(spec)
    if spec.kind == "banded":
        return banded_sym(spec.n, spec.bandwidth, spec.cond, spec.seed, spec.mode)
    return load_matrix_market(spec.path)


# ---------------------------------------------------------------------------
# binary fixtures: <u8 magic, rows, cols, flags, then <f8 entries row-major
# ---------------------------------------------------------------------------

def save_fixture(path, A):
    A = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise FixtureFormatError(f"fixtures hold matrices, got an array of shape {A.shape}")
    flags = FIXTURE_FLAG_SYMMETRIC if A.shape[0] == A.shape[1] and np.array_equal(A, A.T) else 0
    header = np.array([FIXTURE_MAGIC, A.shape[0], A.shape[1], flags], dtype="<u8")
    path = Path(path)
    path.write_bytes(header.tobytes() + np.ascontiguousarray(A, dtype="<f8").tobytes())
    logger.info(f"Saved fixture {path} ({A.shape[0]}x{A.shape[1]})")
    return path


def load_fixture(path):
    path = Path(path)
    raw = path.read_bytes()
    head_bytes = FIXTURE_HEADER_WORDS * 8
    if len(raw) < head_bytes:
        raise FixtureFormatError(MESSAGE_FIXTURE_MAGIC.format(path=path))
    magic, rows, cols, flags = (int(v) for v in np.frombuffer(raw[:head_bytes], dtype="<u8"))
    if magic != FIXTURE_MAGIC:
        raise FixtureFormatError(MESSAGE_FIXTURE_MAGIC.format(path=path))
    body = np.frombuffer(raw[head_bytes:], dtype="<f8") if (len(raw) - head_bytes) % 8 == 0 else None
    if body is None or body.size != rows * cols:
        count = (len(raw) - head_bytes) / 8
        raise FixtureFormatError(MESSAGE_FIXTURE_SIZE.format(path=path, rows=rows, cols=cols, count=count))
    A = body.astype(np.float64).reshape(rows, cols)
    if flags & FIXTURE_FLAG_SYMMETRIC and not np.array_equal(A, A.T):
        raise FixtureFormatError(f"{path}: flagged symmetric but entries are not")
    return A
