"""Eigenvector refinement for real symmetric matrices.

One refinement step (V = accmul(A, X), Rayleigh quotients, W = X^T(V - X D),
correction E, X <- X + X E) is shared by every mode; the modes differ in the
accurate product:

    theoretical | dense | sparse   split only A, multiply by the leading slice
                                   of X (its remainder is discarded)
    fixed_k                        two-sided Ozaki product with k slices

``refine_to_delta`` drives the steps as a small state machine and stops once
the target forward error delta is met by the effective correction or by the
predicted post-step error.
"""

import time
from dataclasses import dataclass
from typing import List, Literal, Optional

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from util import get_logger
from .checks import (
    check_column_norms,
    check_delta,
    check_finite,
    check_gaps,
    check_symmetric,
    require,
)
from .fpcore import PRECISION_BITS, DwArray, NonFiniteError, dw_dot_columns, pair_add_array
from .jacobi import (
    JacobiConvergenceError,
    NotSymmetricError,
    jacobi_eig,
    normalize_signs,
    sort_eigenpairs,
)
from .logic import BaseState, MachineState, Result_ProcessStep, state_machine
from .norms import frobenius, norm2
from .ozaki import (
    FIXED_K_CHOICES,
    SplitParameterError,
    SplitRangeError,
    accmul_fixed_k,
    accmul_one_sided,
    choose_split,
    max_slices_for,
    slice_occupancy,
    spectral_stats,
    split_cols,
    split_rows,
)
from .refine_constant import *

logger = get_logger(__name__)


class RefinementError(ArithmeticError): pass


class ClusteredEigenvaluesError(RefinementError): pass


class DegenerateColumnError(RefinementError): pass


class InvalidConfigError(ValueError): pass


def _dense(M):
    return M.toarray() if sp.issparse(M) else np.asarray(M, dtype=np.float64)


@dataclass(frozen=True)
class EigenApprox:
    X: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64)
        lam = np.array(self.lam, dtype=np.float64).ravel()
        if X.ndim != 2 or X.shape[1] != lam.shape[0]:
            raise ValueError(f"X of shape {X.shape} does not match {lam.shape[0]} eigenvalues")
        if np.any(np.diff(lam) < 0):
            raise ValueError("eigenvalues must be sorted ascending")
        X.setflags(write=False)
        lam.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "lam", lam)

    @classmethod
    def from_unsorted(cls, X, lam):
        lam, X = sort_eigenpairs(np.asarray(lam, dtype=np.float64), np.asarray(X, dtype=np.float64))
        return cls(normalize_signs(X), lam)

    @property
    def n(self):
        return self.X.shape[1]

    def sanity(self):
        return check_column_norms(self.X)


@dataclass(frozen=True)
class CorrectionMatrix:
    E: np.ndarray


class RefineConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    delta: float
    mode: Literal["theoretical", "dense", "sparse", "fixed_k"] = DEFAULT_MODE
    k: int = DEFAULT_FIXED_K
    max_iter: int = Field(DEFAULT_MAX_ITER, ge=1, le=MAX_ITER_LIMIT)
    xi: Optional[float] = None
    gap_floor: float = Field(DEFAULT_GAP_FLOOR, gt=0)
    n_a: Optional[int] = Field(None, ge=1)
    threads: int = Field(1, ge=1)

    @field_validator("delta")
    @classmethod
    def _delta_above_unit_roundoff(cls, v):
        result = check_delta(v)
        if result != "ok":
            raise ValueError(result)
        return v

    @field_validator("k")
    @classmethod
    def _k_supported(cls, v):
        if v not in FIXED_K_CHOICES:
            raise ValueError(f"k must be one of {FIXED_K_CHOICES}")
        return v

    @field_validator("xi")
    @classmethod
    def _xi_positive(cls, v):
        if v is not None and not v > 0:
            raise ValueError("xi must be positive")
        return v


def make_config(**kwargs):
    """RefineConfig(**kwargs), with validation failures raised as InvalidConfigError."""
    try:
        return RefineConfig(**kwargs)
    except ValidationError as ex:
        first = ex.errors()[0]
        where = ".".join(str(p) for p in first.get("loc", ()))
        raise InvalidConfigError(f"{where}: {first['msg']}") from ex


class StepRecord(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    iteration: int
    mode: str
    alpha: Optional[int] = None
    beta: Optional[int] = None
    n_a: int
    multiplications: int
    min_gap: float
    max_abs_eig: float
    correction_fro: float
    correction_norm2: float
    effective_correction: float
    predicted_error: float
    resolution: float = 0.0
    applied: bool = True
    truncation_fro: float = 0.0
    truncation_flag: bool = False
    inexact_slice_products: int = 0
    max_slice_width: int = 0
    slice_cap_hit: bool = False
    forward_error: Optional[float] = None
    orth_backward: Optional[float] = None
    diag_backward: Optional[float] = None
    contraction: Optional[float] = None
    elapsed: Optional[float] = None


class ConvergenceHistory(BaseModel):
    records: List[StepRecord] = Field(default_factory=list)
    converged: bool = False
    stop_reason: Optional[str] = None
    message: Optional[str] = None

    def effective_corrections(self):
        return [r.effective_correction for r in self.records]

    def forward_errors(self):
        return [r.forward_error for r in self.records]


# ---------------------------------------------------------------------------
# accurate-product strategies
# ---------------------------------------------------------------------------

class PlainProduct:
    """fl(A X) in working precision, wrapped as a double-word result."""

    def __call__(self, A, X):
        return DwArray(_dense(A @ X))

    def multiplications(self):
        return 1


class FixedKProduct:
    def __init__(self, k):
        self.k = k

    def __call__(self, A, X):
        return accmul_fixed_k(A, X, self.k)

    def multiplications(self):
        return self.k * (self.k + 1) // 2


class OneSidedProduct:
    """Row split of A by alpha, then sum_r fl(A^(r) X); keeps the split for diagnostics."""

    def __init__(self, params, threads=1):
        self.params = params
        self.threads = threads
        self.split = None

    def __call__(self, A, X):
        self.split = split_rows(A, self.params.alpha, max_slices_for(self.params))
        return accmul_one_sided(self.split, X, self.threads)

    def multiplications(self):
        return self.split.n_terms if self.split is not None else 0


# ---------------------------------------------------------------------------
# the refinement step
# ---------------------------------------------------------------------------

def baseline_eig(A, method="auto"):
    """Working-precision eigendecomposition used as the starting point X0.

    method="jacobi" runs cyclic Jacobi (the reference behaviour), "lapack"
    calls numpy's eigh, and "auto" picks Jacobi up to JACOBI_AUTO_LIMIT.
    """
    require(check_symmetric(A), NotSymmetricError)
    require(check_finite(A), NonFiniteError)
    A = _dense(A)
    n = A.shape[0]
    if method == "auto":
        method = "jacobi" if n <= JACOBI_AUTO_LIMIT else "lapack"
    if method == "jacobi":
        result = jacobi_eig(A)
        if not result.converged:
            raise JacobiConvergenceError(
                f"baseline Jacobi stopped after {result.sweeps} sweeps, off-diagonal mass {result.off_norm:.3e}"
            )
        logger.debug(f"baseline Jacobi: n={n}, {result.sweeps} sweeps")
        return EigenApprox(result.vectors, result.eigenvalues)
    if method == "lapack":
        lam, X = np.linalg.eigh(A)
        return EigenApprox.from_unsorted(X, lam)
    raise ValueError(f"unknown baseline method {method!r}")


@dataclass
class ResidualTerms:
    r: np.ndarray
    lam: np.ndarray
    W: np.ndarray
    V: DwArray


def residual_terms(A, approx, accmul):
    """V = accmul(A, X), r_i = 1 - x_i^T x_i, Rayleigh quotients, W = X^T (V - X D)."""
    X = approx.X
    if A.shape[1] != X.shape[0]:
        raise ValueError(f"A of shape {A.shape} does not match X of shape {X.shape}")
    V = accmul(A, X)
    xx = dw_dot_columns(X, X)
    r = (1.0 - xx).to_float()
    bad = np.flatnonzero(r >= 1.0)
    if bad.size:
        j = int(bad[0])
        raise DegenerateColumnError(MESSAGE_DEGENERATE_COLUMN.format(j=j, r=float(r[j])))
    lam = (dw_dot_columns(X, V) / xx).to_float()
    W = X.T @ ((V.hi - X * lam[None, :]) + V.lo)
    return ResidualTerms(r=r, lam=lam, W=W, V=V)


def build_correction(r, W, lam, gap_floor=DEFAULT_GAP_FLOOR):
    """e_ij = w_ij / (lam_j - lam_i) off the diagonal, e_ii = r_i / 2."""
    require(check_gaps(lam, gap_floor), ClusteredEigenvaluesError)
    lam = np.asarray(lam, dtype=np.float64)
    denom = lam[None, :] - lam[:, None]
    np.fill_diagonal(denom, 1.0)
    E = np.asarray(W, dtype=np.float64) / denom
    np.fill_diagonal(E, np.asarray(r, dtype=np.float64) / 2.0)
    return CorrectionMatrix(E)


def _min_gap(lam):
    gaps = np.diff(np.sort(lam))
    return float(gaps.min()) if gaps.size else np.inf


def refine_step(A, approx, cfg, params=None, iteration=1):
    """One refinement iteration; returns the new EigenApprox and its StepRecord."""
    start = time.perf_counter()
    stats = spectral_stats(A, approx.lam, approx.X)
    x_split = None
    truncation = 0.0
    # a single column has no gap to size beta from
    two_sided = cfg.mode == "fixed_k" or approx.n == 1
    if two_sided:
        product = FixedKProduct(cfg.k)
        X1 = approx.X
    else:
        if params is None:
            params = choose_split(stats, cfg.mode, cfg.delta, cfg.xi, cfg.n_a)
        x_split = split_cols(approx.X, params.beta, 1)
        X1 = x_split.slice_or_zero(0)
        truncation = frobenius(x_split.remainder)
        product = OneSidedProduct(params, cfg.threads)

    terms = residual_terms(A, EigenApprox(X1, approx.lam), product)
    E = build_correction(terms.r, terms.W, terms.lam, cfg.gap_floor).E
    X_new = pair_add_array(X1 @ E, DwArray(X1)).to_float()
    effective = frobenius(X_new - approx.X)
    # truncating X leaves the step accurate to about delta; updates inside the target band are noise
    resolution = cfg.delta if truncation > 0 else 0.0
    applied = resolution == 0.0 or effective > cfg.delta / 2 + resolution
    new = EigenApprox.from_unsorted(X_new, terms.lam) if applied else approx

    xi = stats.n if cfg.xi is None else cfg.xi
    e2 = norm2(E)
    gap = _min_gap(terms.lam)
    max_abs = float(np.max(np.abs(terms.lam))) if terms.lam.size else 0.0
    predicted = e2 * e2 * max_abs / (xi * gap) if gap > 0 else np.inf

    fields = dict(
        iteration=iteration,
        mode=cfg.mode,
        min_gap=stats.min_gap,
        max_abs_eig=stats.max_abs_eig,
        correction_fro=frobenius(E),
        correction_norm2=e2,
        effective_correction=effective,
        predicted_error=predicted,
        resolution=resolution,
        applied=applied,
    )
    if two_sided:
        fields.update(n_a=cfg.k, multiplications=product.multiplications() + 2)
    else:
        widths = slice_occupancy(product.split, x_split)
        inexact = sum(1 for w in widths if w > PRECISION_BITS)
        fields.update(
            alpha=params.alpha,
            beta=params.beta,
            n_a=product.split.n_terms,
            multiplications=product.multiplications() + 2,
            truncation_fro=truncation,
            truncation_flag=truncation > TRUNCATION_FLAG_RATIO * cfg.delta,
            inexact_slice_products=inexact,
            max_slice_width=max(widths, default=0),
            slice_cap_hit=params.n_a is None and product.split.hit_cap(),
        )
        if fields["slice_cap_hit"]:
            logger.warning(MESSAGE_SLICE_CAP.format(cap=product.split.max_slices))
        if fields["truncation_flag"]:
            logger.warning(MESSAGE_TRUNCATION.format(norm=truncation, limit=TRUNCATION_FLAG_RATIO * cfg.delta))
        if inexact:
            logger.warning(MESSAGE_INEXACT.format(count=inexact, width=fields["max_slice_width"]))
    fields["elapsed"] = time.perf_counter() - start
    record = StepRecord(**fields)
    logger.debug(
        f"step {iteration}: |E|_F={record.correction_fro:.3e} effective={effective:.3e} "
        f"predicted={predicted:.3e} n_A={record.n_a}"
    )
    return new, record


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def _with_oracle(record, oracle, A, approx, previous):
    if oracle is None:
        return record
    metrics = oracle.metrics(A, approx)
    update = dict(metrics)
    prev_fe = previous.forward_error if previous is not None else getattr(oracle, "initial_error", None)
    if prev_fe and metrics.get("forward_error") is not None:
        update["contraction"] = metrics["forward_error"] / (prev_fe * prev_fe)
    return record.model_copy(update=update)


class _RefineState(BaseState):
    recoverable = (RefinementError, SplitParameterError, SplitRangeError)

    @classmethod
    def FallbackState(cls):
        return StateFailed


class StateFailed(_RefineState):
    isFinal = True


class StateConverged(_RefineState):
    isFinal = True


class StateStagnated(_RefineState):
    isFinal = True


class StateMaxIter(_RefineState):
    isFinal = True


class StateEntry(_RefineState):
    @classmethod
    def step(cls, **kwargs):
        memory = kwargs["memory"]
        memory["iteration"] = 0
        memory["records"] = []
        cfg = memory["cfg"]
        logger.info(f"refining n={memory['approx'].n} to delta={cfg.delta:g} in {cfg.mode} mode")
        return Result_ProcessStep(), StateChooseSplit


class StateChooseSplit(_RefineState):
    @classmethod
    def step(cls, **kwargs):
        memory = kwargs["memory"]
        cfg, approx = memory["cfg"], memory["approx"]
        params = None
        if cfg.mode != "fixed_k" and approx.n > 1:
            stats = spectral_stats(memory["A"], approx.lam, approx.X)
            params = choose_split(stats, cfg.mode, cfg.delta, cfg.xi, cfg.n_a)
        memory["params"] = params
        return Result_ProcessStep(result=params), StateRefineStep


class StateRefineStep(_RefineState):
    @classmethod
    def step(cls, **kwargs):
        memory = kwargs["memory"]
        iteration = memory["iteration"] + 1
        new, record = refine_step(memory["A"], memory["approx"], memory["cfg"], memory["params"], iteration)
        previous = memory["records"][-1] if memory["records"] else None
        record = _with_oracle(record, memory.get("oracle"), memory["A"], new, previous)
        memory["approx"] = new
        memory["records"].append(record)
        memory["iteration"] = iteration
        return Result_ProcessStep(result=record), StateCheckStop


class StateCheckStop(_RefineState):
    @classmethod
    def step(cls, **kwargs):
        memory = kwargs["memory"]
        cfg = memory["cfg"]
        records = memory["records"]
        last = records[-1]
        effective = [r.effective_correction for r in records]
        if last.effective_correction <= cfg.delta / 2 + last.resolution:
            memory["stop_reason"] = STOP_TARGET
            return Result_ProcessStep(), StateConverged
        if last.predicted_error <= cfg.delta:
            memory["stop_reason"] = STOP_PREDICTED
            return Result_ProcessStep(), StateConverged
        window = effective[-STAGNATION_WINDOW:]
        if len(window) == STAGNATION_WINDOW and all(a <= b for a, b in zip(window, window[1:])):
            memory["stop_reason"] = STOP_STAGNATION
            return Result_ProcessStep(), StateStagnated
        if memory["iteration"] >= cfg.max_iter:
            memory["stop_reason"] = STOP_MAX_ITER
            return Result_ProcessStep(), StateMaxIter
        return Result_ProcessStep(), StateChooseSplit


def _check_inputs(A, X0):
    require(check_symmetric(A), NotSymmetricError)
    require(check_finite(A), NonFiniteError)
    require(check_finite(X0.X), NonFiniteError)
    if X0.X.shape[0] != A.shape[0]:
        raise ValueError(f"X0 has {X0.X.shape[0]} rows, A has {A.shape[0]}")
    require(X0.sanity(), DegenerateColumnError)


def refine_to_delta(A, X0, cfg, oracle=None):
    """Refine X0 until the forward error target cfg.delta is met.

    Returns the final EigenApprox and its ConvergenceHistory. A numerical
    failure inside the loop (clustered estimates, degenerate columns, split
    range) ends the run with the partial result and stop_reason "error".
    ``oracle`` is anything with ``metrics(A, approx)`` and ``initial_error``,
    typically ``oracle.Reference``.
    """
    _check_inputs(A, X0)
    mystate = MachineState(entry_state=StateEntry)
    state_machine.reset(mystate, memory=dict(A=A, approx=X0, cfg=cfg, oracle=oracle))
    final = state_machine.loop(mystate)
    memory = mystate.memory

    history = ConvergenceHistory(records=memory["records"])
    history.converged = final is StateConverged
    history.stop_reason = memory.get("stop_reason", STOP_ERROR)
    iters = len(history.records)
    if final is StateFailed:
        history.message = str(memory.get("error"))
    elif history.converged:
        history.message = MESSAGE_CONVERGED.format(iters=iters, reason=history.stop_reason)
    else:
        history.message = MESSAGE_NOT_CONVERGED.format(iters=iters, reason=history.stop_reason)
    log = logger.info if history.converged else logger.warning
    log(history.message)
    return memory["approx"], history


def refine_fixed_k(A, X0, k, iters, oracle=None, threads=1):
    """Fixed-k baseline: exactly ``iters`` steps with the two-sided k-slice product."""
    cfg = make_config(delta=FIXED_K_NOMINAL_DELTA, mode="fixed_k", k=k, threads=threads)
    history = ConvergenceHistory(stop_reason=STOP_FIXED, converged=True)
    if iters == 0:
        return X0, history
    _check_inputs(A, X0)
    approx = X0
    previous = None
    for it in range(1, iters + 1):
        approx, record = refine_step(A, approx, cfg, iteration=it)
        record = _with_oracle(record, oracle, A, approx, previous)
        history.records.append(record)
        previous = record
    history.message = f"{iters} fixed-k iteration(s) with k={k}"
    return approx, history
