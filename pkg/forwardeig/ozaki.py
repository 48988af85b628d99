"""Error-free slicing of matrices and Ozaki-scheme accurate products.

Row splits (A, shift vector sigma) and column splits (X, shift vector tau)
follow the same recurrence

    slice     = fl((shift + residual) - shift)
    residual  = fl(residual - slice)

with shift = 0.75 * 2**ceil(log2 v) * 2**exponent and v the row (or column)
maximum of |residual|. Matrices are dense float64 ndarrays or scipy CSR
matrices; slices of a CSR matrix keep the parent pattern.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .fpcore import (
    PRECISION_BITS,
    UNIT_ROUNDOFF,
    MAX_EXPONENT,
    DwArray,
    ceil_log2,
    pair_add_array,
)
from .ozaki_constant import *


class SplitRangeError(ArithmeticError): pass


class DimensionMismatchError(ValueError): pass


class AxisMismatchError(ValueError): pass


class SplitParameterError(ValueError): pass


_MIN_SHIFT_EXPONENT = -1022
_U_FRACTION = Fraction(1, 2 ** PRECISION_BITS)


def _dense(M):
    return M.toarray() if sp.issparse(M) else np.asarray(M)


def _zeros_like(M):
    if sp.issparse(M):
        return sp.csr_matrix(M.shape, dtype=np.float64)
    return np.zeros(M.shape)


def _check_finite(M):
    data = M.data if sp.issparse(M) else M
    if not np.all(np.isfinite(data)):
        raise SplitParameterError("matrix contains NaN or Inf")


def shift_constant(v, exponent):
    """0.75 * 2**ceil(log2 v) * 2**exponent, or 0 for v == 0 (exact)."""
    if not math.isfinite(v) or v < 0:
        raise SplitParameterError(f"shift input must be finite and >= 0, got {v!r}")
    if v == 0:
        return 0.0
    e = ceil_log2(v) + int(exponent)
    if e > MAX_EXPONENT - 1:
        raise SplitRangeError(f"shift 0.75*2**{e} overflows the working format")
    return math.ldexp(0.75, e)


def _shift_vector(v, exponent):
    """Vectorised shift_constant; zero rows get 0, tiny rows the smallest normal shift."""
    positive = v > 0
    e = np.where(positive, ceil_log2(np.where(positive, v, 1.0)) + int(exponent), 0)
    if np.any(e[positive] > MAX_EXPONENT - 1):
        raise SplitRangeError(
            f"shift exponent {int(e[positive].max())} overflows the working format"
        )
    # below 2^-1022 the sum sigma + a is still exact, so the slice is the whole row
    e = np.maximum(e, _MIN_SHIFT_EXPONENT)
    return np.where(positive, np.ldexp(0.75, e), 0.0)


@dataclass(frozen=True)
class SplitMatrix:
    slices: Tuple
    remainder: object
    shifts: Tuple
    axis: str  # "row" or "column"
    exponent: int
    max_slices: int

    @property
    def n_terms(self):
        return len(self.slices) + 1

    @property
    def shape(self):
        return self.remainder.shape

    def remainder_is_zero(self):
        data = self.remainder.data if sp.issparse(self.remainder) else self.remainder
        return not np.any(data)

    def hit_cap(self):
        return len(self.slices) == self.max_slices and not self.remainder_is_zero()

    def slice_or_zero(self, r):
        """Slice r (0-based), or a zero matrix when the split stopped early."""
        if r < len(self.slices):
            return self.slices[r]
        return _zeros_like(self.remainder)

    def reconstruct(self):
        # each residual equals slice + next residual exactly, so sum backwards
        acc = self.remainder
        for s in reversed(self.slices):
            acc = s + acc
        return acc


def _rowmax_abs(M):
    if sp.issparse(M):
        M = sp.csr_matrix(M)
        rows = np.repeat(np.arange(M.shape[0]), np.diff(M.indptr))
        v = np.zeros(M.shape[0])
        np.maximum.at(v, rows, np.abs(M.data))
        return v, rows
    return np.max(np.abs(M), axis=1) if M.shape[1] else np.zeros(M.shape[0]), None


def split_rows(A, alpha, max_slices=SLICE_CAP):
    """Row-wise error-free split of A with shift exponent alpha."""
    if max_slices < 0:
        raise SplitParameterError(f"max_slices must be >= 0, got {max_slices}")
    _check_finite(A)
    sparse = sp.issparse(A)
    if sparse:
        A = sp.csr_matrix(A, dtype=np.float64, copy=True)
        A.sum_duplicates()
        residual = A.data.copy()
    else:
        residual = np.array(A, dtype=np.float64)

    slices, shifts = [], []
    for _ in range(max_slices):
        if sparse:
            v, rows = _rowmax_abs(sp.csr_matrix((residual, A.indices, A.indptr), shape=A.shape))
        else:
            v, rows = _rowmax_abs(residual)
        if not np.any(v):
            break
        sigma = _shift_vector(v, alpha)
        s = sigma[rows] if sparse else sigma[:, None]
        piece = (s + residual) - s
        residual = residual - piece
        shifts.append(sigma)
        if sparse:
            slices.append(sp.csr_matrix((piece, A.indices.copy(), A.indptr.copy()), shape=A.shape))
        else:
            slices.append(piece)

    if sparse:
        remainder = sp.csr_matrix((residual, A.indices.copy(), A.indptr.copy()), shape=A.shape)
    else:
        remainder = residual
    return SplitMatrix(tuple(slices), remainder, tuple(shifts), "row", int(alpha), max_slices)


def split_cols(X, beta, max_slices=SLICE_CAP):
    """Column-wise split: the transpose of the row split of X.T."""
    Xt = sp.csr_matrix(X.T) if sp.issparse(X) else np.asarray(X, dtype=np.float64).T
    rows = split_rows(Xt, beta, max_slices)

    def back(M):
        return sp.csr_matrix(M.T) if sp.issparse(M) else np.ascontiguousarray(M.T)

    return SplitMatrix(
        tuple(back(s) for s in rows.slices),
        back(rows.remainder),
        rows.shifts,
        "column",
        int(beta),
        max_slices,
    )


def _product(left, right):
    return _dense(left @ right)


def _accumulate(products, shape):
    acc = DwArray.zeros(shape)
    for P in products:
        acc = pair_add_array(P, acc)
    return acc


def _check_inner(A, B):
    if A.shape[1] != B.shape[0]:
        raise DimensionMismatchError(f"inner dimensions differ: {A.shape} x {B.shape}")


def two_sided_exponent(n):
    """alpha = beta = ceil((53 + ceil(log2 n)) / 2), enough for exact slice products."""
    return -(-(PRECISION_BITS + ceil_log2(float(max(n, 1)))) // 2)


def accmul_fixed_k(A, B, k, exponent=None):
    """Two-sided Ozaki product with k slices per operand, summed into a DwArray."""
    if k not in FIXED_K_FORMS:
        raise SplitParameterError(f"k must be one of {FIXED_K_CHOICES}, got {k}")
    _check_inner(A, B)
    if exponent is None:
        exponent = two_sided_exponent(A.shape[1])
    a = split_rows(A, exponent, k - 1)
    b = split_cols(B, exponent, k - 1)
    operands = {
        "A": A,
        "B": B,
        "Arem": a.remainder,
        "Brem": b.remainder,
        "A-Arem": A - a.remainder,
        "A1+A2": a.slice_or_zero(0) + a.slice_or_zero(1),
        "A2+A3": a.slice_or_zero(1) + a.slice_or_zero(2),
    }
    for r in range(3):
        operands[f"A{r + 1}"] = a.slice_or_zero(r)
        operands[f"B{r + 1}"] = b.slice_or_zero(r)
    products = (_product(operands[left], operands[right]) for left, right in FIXED_K_FORMS[k])
    return _accumulate(products, (A.shape[0], B.shape[1]))


def accmul_one_sided(a_split, X, threads=1):
    """sum_r fl(A^(r) X) + fl(Arem X), accumulated in slice order.

    With threads > 1 the products run in a pool; the reduction stays ordered.
    """
    if a_split.axis != "row":
        raise AxisMismatchError("accmul_one_sided needs a row split of A")
    _check_inner(a_split.remainder, X)
    terms = list(a_split.slices) + [a_split.remainder]
    if threads and threads > 1 and len(terms) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            products = list(pool.map(lambda M: _product(M, X), terms))
    else:
        products = (_product(M, X) for M in terms)
    return _accumulate(products, (a_split.shape[0], X.shape[1]))


def slice_occupancy(a_split, x_split):
    """Worst significand width (bits) of any entry of fl(A^(r) X^(1)), per slice.

    Entries of A^(r) sit on the grid 2u*ufp(sigma_i), entries of X^(1) on
    2u*ufp(tau_j); the exact product entry is a multiple of the product of the
    two grids, so its width is bounded by log2((|A^(r)||X^(1)|)_ij / grid).
    Widths above PRECISION_BITS mark a possibly inexact product.
    """
    if not x_split.slices:
        return [0] * len(a_split.slices)
    x1 = np.abs(_dense(x_split.slices[0]))
    tau = x_split.shifts[0]
    h_exp = np.where(tau > 0, np.frexp(np.where(tau > 0, tau, 1.0))[1] - 1, 0) - PRECISION_BITS + 1
    widths = []
    for piece, sigma in zip(a_split.slices, a_split.shifts):
        bound = _product(abs(piece), x1)
        ok = (bound > 0) & (sigma[:, None] > 0) & (tau[None, :] > 0)
        if not np.any(ok):
            widths.append(0)
            continue
        g_exp = np.where(sigma > 0, np.frexp(np.where(sigma > 0, sigma, 1.0))[1] - 1, 0) - PRECISION_BITS + 1
        b_exp = ceil_log2(np.where(ok, bound, 1.0))
        w = np.where(ok, b_exp - g_exp[:, None] - h_exp[None, :], 0)
        widths.append(int(w.max()))
    return widths


# ---------------------------------------------------------------------------
# split constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralStats:
    min_gap: float
    max_abs_eig: float
    colmax: np.ndarray = field(repr=False)
    n: int
    max_row_nnz: Optional[int] = None


@dataclass(frozen=True)
class SplitParams:
    alpha: int
    beta: int
    n_x: int = N_X_PROPOSED
    n_a: Optional[int] = None  # None: split until the remainder vanishes (or the cap)

    def exact_products(self, n):
        """alpha + beta >= -log2 u + log2 n, the condition for exact slice products."""
        return 2 ** (self.alpha + self.beta) >= 2 ** PRECISION_BITS * n


def max_row_nnz(A):
    if sp.issparse(A):
        return int(np.diff(sp.csr_matrix(A).indptr).max(initial=0))
    return int(np.count_nonzero(A, axis=1).max(initial=0))


def spectral_stats(A, lam, X):
    lam = np.sort(np.asarray(lam, dtype=np.float64))
    gaps = np.diff(lam)
    return SpectralStats(
        min_gap=float(gaps.min()) if gaps.size else math.inf,
        max_abs_eig=float(np.max(np.abs(lam))) if lam.size else 0.0,
        colmax=np.max(np.abs(X), axis=0),
        n=int(X.shape[0]),
        max_row_nnz=max_row_nnz(A),
    )


def _sum_sq_pow2(colmax):
    """sum_j 2**(2*ceil(log2 w_j)) over w_j > 0, exactly."""
    total = Fraction(0)
    for w in colmax:
        if w > 0:
            total += Fraction(2) ** (2 * ceil_log2(float(w)))
    return total


def _ceil_log4(q):
    """Smallest integer b with 4**b >= q (q > 0 Fraction)."""
    b = (q.numerator.bit_length() - q.denominator.bit_length()) // 2
    while Fraction(4) ** b < q:
        b += 1
    while Fraction(4) ** (b - 1) >= q:
        b -= 1
    return b


def _floor_log4(q):
    """Largest integer b with 4**b <= q."""
    b = _ceil_log4(q)
    return b if Fraction(4) ** b == q else b - 1


def _ceil_log2_int(n):
    return max(int(n) - 1, 0).bit_length()


def _validate(stats, delta):
    if not delta > UNIT_ROUNDOFF:
        raise SplitParameterError(MESSAGE_DELTA_BELOW_U)
    if not stats.min_gap > 0:
        raise SplitParameterError(MESSAGE_ZERO_GAP)
    if not stats.max_abs_eig > 0:
        raise SplitParameterError(MESSAGE_ZERO_SPECTRUM)
    s = _sum_sq_pow2(stats.colmax)
    if s == 0:
        raise SplitParameterError(MESSAGE_ZERO_COLUMNS)
    return s


def _q_squared(stats, numerator, s):
    # (2**beta)**2 compared against numerator * gap / (max|lam| * S * (0.75 u)**2)
    ratio = Fraction(stats.min_gap) / Fraction(stats.max_abs_eig)
    return numerator * ratio / (s * Fraction(9, 16) * _U_FRACTION ** 2)


def _alpha_floor(alpha):
    return max(int(alpha), 1)


def choose_beta_theoretical(stats, delta, xi):
    s = _validate(stats, delta)
    if not xi > 0:
        raise SplitParameterError(f"xi must be positive, got {xi}")
    beta = _ceil_log4(_q_squared(stats, Fraction(delta) * Fraction(xi), s))
    alpha = PRECISION_BITS - beta + _ceil_log2_int(stats.n)
    return SplitParams(alpha=_alpha_floor(alpha), beta=beta)


def choose_beta_dense(stats, delta):
    s = _validate(stats, delta)
    beta = _floor_log4(_q_squared(stats, Fraction(delta) * stats.n, s))
    # ceil(log2 sqrt n) == ceil(log4 n)
    alpha = PRECISION_BITS - beta + _ceil_log4(Fraction(stats.n))
    return SplitParams(alpha=_alpha_floor(alpha), beta=beta)


def choose_beta_sparse(stats, delta):
    s = _validate(stats, delta)
    k = stats.max_row_nnz
    if k is None or k < 1:
        raise SplitParameterError("sparse rule needs max_row_nnz >= 1")
    beta = _floor_log4(_q_squared(stats, Fraction(delta) * min(k * k, stats.n), s))
    alpha = PRECISION_BITS - beta + _ceil_log2_int(k)
    return SplitParams(alpha=_alpha_floor(alpha), beta=beta)


def choose_split(stats, mode, delta, xi=None, n_a=None):
    """Dispatch to the split rule named by mode; n_a pins the number of A terms."""
    if mode == "theoretical":
        params = choose_beta_theoretical(stats, delta, stats.n if xi is None else xi)
    elif mode == "dense":
        params = choose_beta_dense(stats, delta)
    elif mode == "sparse":
        params = choose_beta_sparse(stats, delta)
    else:
        raise SplitParameterError(f"no split rule for mode {mode!r}; expected one of {MODES[:-1]}")
    if n_a is not None:
        params = SplitParams(alpha=params.alpha, beta=params.beta, n_a=int(n_a))
    return params


def max_slices_for(params):
    """Slices to cut from A: n_a - 1 when pinned, else the auto cap."""
    return SLICE_CAP if params.n_a is None else params.n_a - 1
