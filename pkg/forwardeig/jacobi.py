"""Cyclic Jacobi for real symmetric matrices, in working precision or double-word.

Pairs are visited in round-robin order: each round is a set of disjoint
(p, q) pairs, so all of its rotations commute and are applied together as
whole-column and whole-row array updates. The same code drives float64
ndarrays and ``DwArray`` operands.
"""

from dataclasses import dataclass

import numpy as np

from util import get_logger
from .fpcore import UNIT_ROUNDOFF, DwArray
from .jacobi_constant import *

logger = get_logger(__name__)


class JacobiConvergenceError(ArithmeticError): pass


class NotSymmetricError(ValueError): pass


@dataclass
class JacobiResult:
    eigenvalues: object  # ndarray, or DwArray for the double-word engine
    vectors: object
    sweeps: int
    off_norm: float
    converged: bool


def _is_dw(x):
    return isinstance(x, DwArray)


def _hi(x):
    return x.hi if _is_dw(x) else x


def _where(mask, a, b):
    if _is_dw(a) or _is_dw(b):
        return DwArray.where(mask, a, b)
    return np.where(mask, a, b)


def _sqrt(x):
    return x.sqrt() if _is_dw(x) else np.sqrt(x)


def _abs(x):
    return x.abs() if _is_dw(x) else np.abs(x)


def round_robin(n):
    """Rounds of disjoint (p, q) index pairs covering every pair once (circle method)."""
    m = n + (n % 2)
    others = list(range(1, m))
    rounds = []
    for _ in range(m - 1):
        order = [0] + others
        pairs = [(order[i], order[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(p, q), max(p, q)) for p, q in pairs if p < n and q < n]
        rounds.append((np.array([p for p, _ in pairs], dtype=np.int64),
                       np.array([q for _, q in pairs], dtype=np.int64)))
        others = others[-1:] + others[:-1]
    return rounds


def _rotations(app, aqq, apq):
    zero = _hi(apq) == 0.0
    tau = (aqq - app) / (_where(zero, 1.0, apq) * 2.0)
    big = np.abs(_hi(tau)) > TAU_LIMIT
    tau_small = _where(big, 1.0, tau)
    sign = np.where(_hi(tau_small) >= 0.0, 1.0, -1.0)
    t = sign / (_abs(tau_small) + _sqrt(tau_small * tau_small + 1.0))
    t = _where(big, 1.0 / (_where(big, tau, 1.0) * 2.0), t)
    t = _where(zero, 0.0, t)
    c = 1.0 / _sqrt(t * t + 1.0)
    return c, t * c


def _rotate(A, V, P, Q):
    c, s = _rotations(A[P, P], A[Q, Q], A[P, Q])
    Ap, Aq = A[:, P], A[:, Q]
    A[:, P] = Ap * c - Aq * s
    A[:, Q] = Ap * s + Aq * c
    cr, sr = c[:, None], s[:, None]
    Ap, Aq = A[P, :], A[Q, :]
    A[P, :] = Ap * cr - Aq * sr
    A[Q, :] = Ap * sr + Aq * cr
    A[P, Q] = 0.0
    A[Q, P] = 0.0
    Vp, Vq = V[:, P], V[:, Q]
    V[:, P] = Vp * c - Vq * s
    V[:, Q] = Vp * s + Vq * c


def off_norm(A):
    """Frobenius norm of the off-diagonal part, in working precision."""
    M = A.to_float() if _is_dw(A) else np.asarray(A)
    off = M - np.diag(np.diag(M))
    return float(np.linalg.norm(off))


def normalize_signs(V):
    """Flip each column so its largest-magnitude entry is positive."""
    H = _hi(V)
    if H.size == 0:
        return V
    idx = np.argmax(np.abs(H), axis=0)
    flip = H[idx, np.arange(H.shape[1])] < 0.0
    return _where(flip[None, :], -V, V)


def sort_eigenpairs(lam, V):
    if _is_dw(lam):
        order = np.lexsort((lam.lo, lam.hi))
    else:
        order = np.argsort(lam, kind="stable")
    return lam[order], V[:, order]


def _require_symmetric(A):
    parts = (A.hi, A.lo) if _is_dw(A) else (A,)
    for part in parts:
        if part.ndim != 2 or part.shape[0] != part.shape[1] or not np.array_equal(part, part.T):
            raise NotSymmetricError(MESSAGE_NOT_SYMMETRIC)


def jacobi_eig(A, V0=None, tol_factor=None, max_sweeps=None):
    """Eigen-decompose a symmetric A (ndarray or DwArray) by cyclic Jacobi.

    Stops once the off-diagonal Frobenius mass is <= n * eps * ||A||_F, with
    eps = u for float input and u**2 for double-word input, or after the sweep
    cap. V0 seeds the accumulated rotations (identity by default). Eigenvalues
    come back ascending with sign-normalised columns.
    """
    _require_symmetric(A)
    dw = _is_dw(A)
    n = A.shape[0]
    A = A.copy() if dw else np.array(A, dtype=np.float64)
    if V0 is None:
        V = DwArray.eye(n) if dw else np.eye(n)
    else:
        V = V0.copy() if dw else np.array(V0, dtype=np.float64)
    if tol_factor is None:
        tol_factor = UNIT_ROUNDOFF ** 2 if dw else UNIT_ROUNDOFF
    if max_sweeps is None:
        max_sweeps = DW_SWEEP_CAP if dw else FLOAT_SWEEP_CAP

    frob = float(np.linalg.norm(_hi(A)))
    target = n * tol_factor * frob
    rounds = round_robin(n) if n > 1 else []
    off = off_norm(A)
    sweeps = 0
    while off > target and sweeps < max_sweeps:
        for P, Q in rounds:
            _rotate(A, V, P, Q)
        sweeps += 1
        off = off_norm(A)
        logger.debug(f"jacobi sweep {sweeps}: off-diagonal mass {off:.3e}")

    converged = off <= target
    if not converged:
        logger.warning(MESSAGE_NO_CONVERGENCE.format(sweeps=sweeps, off=off, target=target))
    idx = np.arange(n)
    lam, V = sort_eigenpairs(A[idx, idx], V)
    return JacobiResult(lam, normalize_signs(V), sweeps, off, converged)
