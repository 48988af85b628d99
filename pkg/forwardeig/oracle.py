"""Ground truth: a double-word reference eigensolver, exact products, error metrics.

The reference is computed from the same rounded matrix the refinement sees.
Exact products come in two independently coded flavours, scaled big
integers (``rational_matmul``) and ``fractions.Fraction`` (``fraction_matmul``).
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np
import scipy.sparse as sp

from util import get_logger
from .checks import check_finite, check_symmetric, require
from .fpcore import PRECISION_BITS, UNIT_ROUNDOFF, DwArray, NonFiniteError, dw_matmul
from .jacobi import NotSymmetricError, jacobi_eig, normalize_signs
from .norms import norm2
from .oracle_constant import *

logger = get_logger(__name__)


class OracleSizeError(ValueError): pass


class MatchingAmbiguityError(ValueError): pass


class ReferenceAccuracyError(ArithmeticError): pass


def _dense(M):
    return M.toarray() if sp.issparse(M) else np.asarray(M, dtype=np.float64)


# ---------------------------------------------------------------------------
# exact products
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RationalMatrix:
    """Dyadic rationals: entry value = mantissas[i, j] * 2**scale, mantissas Python ints."""

    mantissas: np.ndarray
    scale: int

    @classmethod
    def from_float(cls, M):
        M = _dense(M)
        require(check_finite(M), NonFiniteError)
        frac, exp = np.frexp(M)
        ints = np.ldexp(frac, PRECISION_BITS).astype(np.int64)
        exps = exp.astype(np.int64) - PRECISION_BITS
        nonzero = ints != 0
        scale = int(exps[nonzero].min()) if np.any(nonzero) else 0
        shifts = np.where(nonzero, exps - scale, 0)
        return cls(ints.astype(object) << shifts.astype(object), scale)

    @classmethod
    def from_dw(cls, D):
        return cls.from_float(D.hi) + cls.from_float(D.lo)

    @property
    def shape(self):
        return self.mantissas.shape

    def _aligned(self, other):
        s = min(self.scale, other.scale)
        a = self.mantissas << (self.scale - s)
        b = other.mantissas << (other.scale - s)
        return a, b, s

    def __add__(self, other):
        a, b, s = self._aligned(other)
        return RationalMatrix(a + b, s)

    def __sub__(self, other):
        a, b, s = self._aligned(other)
        return RationalMatrix(a - b, s)

    def to_fractions(self):
        unit = Fraction(2) ** self.scale
        out = np.empty(self.shape, dtype=object)
        for idx in np.ndindex(self.shape):
            out[idx] = self.mantissas[idx] * unit
        return out

    def to_float(self):
        """Entries rounded to nearest float64."""
        return np.array(
            [float(f) for f in self.to_fractions().ravel()], dtype=np.float64
        ).reshape(self.shape)

    def abs_max(self):
        if self.mantissas.size == 0:
            return 0.0
        return float(max(abs(int(m)) for m in self.mantissas.ravel()) * Fraction(2) ** self.scale)

    def equals(self, other):
        """Exact equality with another RationalMatrix, a DwArray or a float array."""
        if isinstance(other, DwArray):
            other = RationalMatrix.from_dw(other)
        elif not isinstance(other, RationalMatrix):
            other = RationalMatrix.from_float(other)
        if other.shape != self.shape:
            return False
        diff = self - other
        return not any(int(m) != 0 for m in diff.mantissas.ravel())


def _check_rational_cap(*mats, cap=RATIONAL_SIZE_CAP):
    for M in mats:
        if max(M.shape) > cap:
            raise OracleSizeError(MESSAGE_RATIONAL_CAP.format(cap=cap, shape=M.shape))


def rational_matmul(A, B, cap=RATIONAL_SIZE_CAP):
    """Exact A @ B via integer mantissas and a common power-of-two scale."""
    _check_rational_cap(A, B, cap=cap)
    if A.shape[1] != B.shape[0]:
        raise ValueError(f"inner dimensions differ: {A.shape} x {B.shape}")
    ra = RationalMatrix.from_float(A)
    rb = RationalMatrix.from_float(B)
    return RationalMatrix(ra.mantissas.dot(rb.mantissas), ra.scale + rb.scale)


def fraction_matmul(A, B, cap=RATIONAL_SIZE_CAP):
    """Exact A @ B as an object array of Fractions, by explicit loops."""
    _check_rational_cap(A, B, cap=cap)
    A, B = _dense(A), _dense(B)
    if A.shape[1] != B.shape[0]:
        raise ValueError(f"inner dimensions differ: {A.shape} x {B.shape}")
    fa = [[Fraction(float(x)) for x in row] for row in A]
    fb = [[Fraction(float(x)) for x in row] for row in B]
    out = np.empty((A.shape[0], B.shape[1]), dtype=object)
    for i in range(A.shape[0]):
        for j in range(B.shape[1]):
            out[i, j] = sum((fa[i][k] * fb[k][j] for k in range(A.shape[1])), Fraction(0))
    return out


def sturm_count(diag, offdiag, x):
    """Number of eigenvalues < x of the symmetric tridiagonal (diag, offdiag), exactly."""
    x = Fraction(x)
    count = 0
    q = None  # no previous pivot, or an infinite one
    for i, d in enumerate(diag):
        d = Fraction(d) - x
        if q is None:
            q = d
        elif q == 0:
            # a zero pivot is read as +0, so the next one is -inf unless the matrix decouples
            if offdiag[i - 1] != 0:
                count += 1
                q = None
                continue
            q = d
        else:
            e = Fraction(offdiag[i - 1])
            q = d - e * e / q
        if q < 0:
            count += 1
    return count


# ---------------------------------------------------------------------------
# reference eigendecomposition
# ---------------------------------------------------------------------------

@dataclass
class Reference:
    X: DwArray
    lam: DwArray
    residual: float
    orthogonality: float
    margin: float  # max(residual / ||A||, orthogonality) / (n * u**2)
    sweeps: int
    backward: bool = True
    initial_error: Optional[float] = None

    def forward_error(self, approx):
        return forward_error(self.X, self.lam, approx)

    def metrics(self, A, approx):
        out = dict(forward_error=self.forward_error(approx))
        if self.backward:
            out["orth_backward"], out["diag_backward"] = backward_errors(A, approx)
        return out


def _orthonormalise(X0):
    """Q = X0 (I + E/2 + 3E^2/8), E = I - X0^T X0: X0 made orthonormal to double-word level."""
    n = X0.shape[1]
    E = (DwArray.eye(n) - dw_matmul(X0.T, X0)).to_float()
    corr = E / 2.0 + 0.375 * (E @ E)
    return dw_matmul(X0, corr) + X0


def reference_eig(A, warm_start=True, cap=REFERENCE_SIZE_CAP):
    """Double-word eigendecomposition of the symmetric float matrix A.

    With warm_start the LAPACK eigenvectors are orthonormalised in double-word,
    A is rotated into that basis and the nearly diagonal result is finished by
    double-word Jacobi; otherwise Jacobi runs on A from the identity.
    """
    require(check_symmetric(A), NotSymmetricError)
    A = _dense(A)
    require(check_finite(A), NonFiniteError)
    n = A.shape[0]
    if n > cap:
        raise OracleSizeError(MESSAGE_REFERENCE_CAP.format(cap=cap, n=n))

    if warm_start and n > 1:
        _, X0 = np.linalg.eigh(A)
        Q = _orthonormalise(X0)
        B = dw_matmul(Q.T, dw_matmul(A, Q))
        B = (B + B.T) * 0.5
        result = jacobi_eig(B)
        X = dw_matmul(Q, result.vectors)
    else:
        result = jacobi_eig(DwArray(A))
        X = result.vectors
    lam = result.eigenvalues
    X = normalize_signs(X)

    norm_a = norm2(A)
    residual = norm2((dw_matmul(A, X) - X * lam[None, :]).to_float())
    orth = norm2((DwArray.eye(n) - dw_matmul(X.T, X)).to_float())
    unit = n * UNIT_ROUNDOFF ** 2
    margin = max(residual / (unit * norm_a) if norm_a > 0 else 0.0, orth / unit)
    if margin > RESIDUAL_FACTOR:
        raise ReferenceAccuracyError(
            MESSAGE_REFERENCE_INACCURATE.format(residual=residual, orth=orth, limit=RESIDUAL_FACTOR * unit)
        )
    if not result.converged:
        logger.warning(f"reference Jacobi hit its sweep cap; residual check passed (margin {margin:.1f})")
    logger.info(f"reference eigensystem n={n}: {result.sweeps} sweeps, residual margin {margin:.1f}")
    return Reference(X=X, lam=lam, residual=residual, orthogonality=orth, margin=margin, sweeps=result.sweeps)


# ---------------------------------------------------------------------------
# error metrics
# ---------------------------------------------------------------------------

def forward_error(X_ref, lam_ref, approx):
    """||X_ref - X_hat||_2 after per-column sign matching, by power iteration."""
    X_ref = DwArray.lift(X_ref)
    lam_ref = DwArray.lift(lam_ref)
    X_hat = np.asarray(approx.X, dtype=np.float64)
    if X_hat.shape != X_ref.shape:
        raise ValueError(f"shape mismatch: {X_ref.shape} vs {X_hat.shape}")
    ref = lam_ref.to_float()
    gaps = np.diff(ref)
    if gaps.size:
        half_gap = float(gaps.min()) / 2
        off = np.abs(np.asarray(approx.lam) - ref)
        bad = np.flatnonzero(off > half_gap)
        if bad.size:
            i = int(bad[0])
            raise MatchingAmbiguityError(
                MESSAGE_AMBIGUOUS.format(i=i, approx=float(approx.lam[i]), half_gap=half_gap, ref=float(ref[i]))
            )
    dots = np.sum(X_ref.hi * X_hat, axis=0)
    signs = np.where(dots < 0, -1.0, 1.0)
    return norm2((X_ref - X_hat * signs[None, :]).to_float())


def backward_errors(A, approx):
    """(||I - X^T X||_2, ||X^T A X - D||_2), residuals formed in double-word."""
    X = np.asarray(approx.X, dtype=np.float64)
    A = _dense(A)
    if A.shape[1] != X.shape[0]:
        raise ValueError(f"A of shape {A.shape} does not match X of shape {X.shape}")
    n = X.shape[1]
    orth = norm2((DwArray.eye(n) - dw_matmul(X.T, X)).to_float())
    S = dw_matmul(X.T, dw_matmul(A, X)) - np.diag(np.asarray(approx.lam, dtype=np.float64))
    return orth, norm2(S.to_float())
