"""Error-free floating-point building blocks.

Scalars are plain Python floats (binary64). The same kernels run elementwise on
numpy arrays through ``DwArray``, which is what the oracle and the accurate
matrix products use. Non-finite inputs are rejected at the scalar API boundary;
the array kernels leave that check to their callers (``DwArray.check_finite``).

Kernel error constants (relative, round-to-nearest, no underflow):
    dw_add   <= 3 u^2      (accurate DW + DW)
    dw_mul   <= 7 u^2      (DW x DW without the FMA-only shortcut)
    dw_mul_fp<= 2 u^2
    dw_div   <= 15 u^2
    dw_sqrt  <= 4 u^2
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

PRECISION_BITS = 53
UNIT_ROUNDOFF = 2.0 ** -PRECISION_BITS
MAX_EXPONENT = 1023
_SPLITTER = 2.0 ** 27 + 1.0
_SPLIT_LIMIT = 2.0 ** 996

HAS_FMA = hasattr(math, "fma")


class NonFiniteError(ValueError): pass


class FloatOverflowError(ArithmeticError): pass


class InvalidOperationError(ArithmeticError): pass


def _require_finite(*values):
    for v in values:
        if isinstance(v, np.ndarray):
            if not np.all(np.isfinite(v)):
                raise NonFiniteError("NaN or Inf passed to an error-free kernel")
        elif not math.isfinite(v):
            raise NonFiniteError(f"non-finite value {v!r} passed to an error-free kernel")


def _require_no_overflow(*values):
    for v in values:
        if isinstance(v, np.ndarray):
            if not np.all(np.isfinite(v)):
                raise FloatOverflowError("intermediate result overflowed")
        elif not math.isfinite(v):
            raise FloatOverflowError("intermediate result overflowed")


# ---------------------------------------------------------------------------
# raw kernels: no checks, work on floats and on broadcastable ndarrays alike
# ---------------------------------------------------------------------------

def _two_sum(a, b):
    x = a + b
    z = x - a
    y = (a - (x - z)) + (b - z)
    return x, y


def _fast_two_sum(a, b):
    # requires |a| >= |b| or a == 0
    s = a + b
    z = s - a
    return s, b - z


def _split(a):
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod_dekker(a, b):
    x = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    y = al * bl - (((x - ah * bh) - al * bh) - ah * bl)
    return x, y


def _two_prod(a, b):
    if HAS_FMA and not isinstance(a, np.ndarray) and not isinstance(b, np.ndarray):
        x = a * b
        return x, math.fma(a, b, -x)
    return _two_prod_dekker(a, b)


def _dw_add(xh, xl, yh, yl):
    sh, sl = _two_sum(xh, yh)
    th, tl = _two_sum(xl, yl)
    c = sl + th
    vh, vl = _fast_two_sum(sh, c)
    w = tl + vl
    return _fast_two_sum(vh, w)


def _dw_mul(xh, xl, yh, yl):
    ch, cl1 = _two_prod(xh, yh)
    tl1 = xh * yl
    tl2 = xl * yh
    cl2 = tl1 + tl2
    cl3 = cl1 + cl2
    return _fast_two_sum(ch, cl3)


def _dw_mul_fp(xh, xl, y):
    ch, cl1 = _two_prod(xh, y)
    cl2 = xl * y
    th, tl1 = _fast_two_sum(ch, cl2)
    tl2 = tl1 + cl1
    return _fast_two_sum(th, tl2)


def _dw_div(xh, xl, yh, yl):
    th = xh / yh
    rh, rl = _dw_mul_fp(yh, yl, th)
    pi_h = xh - rh
    d_l = xl - rl
    d = pi_h + d_l
    tl = d / yh
    return _fast_two_sum(th, tl)


def _dw_sqrt(xh, xl):
    s = np.sqrt(xh) if isinstance(xh, np.ndarray) else math.sqrt(xh)
    ph, pl = _two_prod(s, s)
    e = ((xh - ph) - pl + xl) / (2.0 * s)
    return _fast_two_sum(s, e)


# ---------------------------------------------------------------------------
# scalar API
# ---------------------------------------------------------------------------

def ufp(x):
    """Unit in the first place: 2**floor(log2|x|), and 0 for 0.

    Accepts a float or an ndarray; the result is an exact power of two.
    """
    _require_finite(x)
    if isinstance(x, np.ndarray):
        m, e = np.frexp(x)
        return np.where(x == 0, 0.0, np.ldexp(1.0, e - 1))
    if x == 0:
        return 0.0
    _, e = math.frexp(x)
    return math.ldexp(1.0, e - 1)


def ceil_log2(v):
    """ceil(log2 v) for v > 0, read off the exponent field (exact at powers of two)."""
    if isinstance(v, np.ndarray):
        m, e = np.frexp(v)
        return np.where(m == 0.5, e - 1, e).astype(np.int64)
    m, e = math.frexp(v)
    return e - 1 if m == 0.5 else e


def two_sum(a, b):
    """Knuth's TwoSum: x = fl(a+b) and x + y == a + b exactly."""
    _require_finite(a, b)
    x, y = _two_sum(a, b)
    _require_no_overflow(x, y)
    return x, y


def fast_two_sum(a, b):
    _require_finite(a, b)
    s, t = _fast_two_sum(a, b)
    _require_no_overflow(s, t)
    return s, t


def two_prod(a, b):
    """x = fl(a*b), x + y == a*b exactly (FMA when the interpreter has one, else Dekker)."""
    _require_finite(a, b)
    if not HAS_FMA and max(abs(a), abs(b)) > _SPLIT_LIMIT:
        raise FloatOverflowError("operand too large for Veltkamp splitting")
    x, y = _two_prod(a, b)
    _require_no_overflow(x, y)
    return x, y


@dataclass(frozen=True)
class DoubleWord:
    hi: float
    lo: float = 0.0

    def __post_init__(self):
        _require_finite(self.hi, self.lo)

    @classmethod
    def from_float(cls, x):
        return cls(float(x), 0.0)

    def is_normalized(self):
        return self.hi + self.lo == self.hi

    def as_fraction(self):
        return Fraction(self.hi) + Fraction(self.lo)

    def __float__(self):
        return self.hi + self.lo


def _dw(hi, lo):
    _require_no_overflow(hi, lo)
    return DoubleWord(float(hi), float(lo))


def pair_add(a, b):
    """Add a working-precision number to a double-word, dropping nothing but b.lo's rounding.

    [c_h, t] = TwoSum(a, b.hi); c_l = fl(b.lo + t). The pair is returned as
    computed, without renormalisation.
    """
    _require_finite(a)
    ch, t = _two_sum(a, b.hi)
    return _dw(ch, b.lo + t)


def dw_add(a, b):
    return _dw(*_dw_add(a.hi, a.lo, b.hi, b.lo))


def dw_sub(a, b):
    return _dw(*_dw_add(a.hi, a.lo, -b.hi, -b.lo))


def dw_mul(a, b):
    _require_finite(a.hi, b.hi)
    if not HAS_FMA and max(abs(a.hi), abs(b.hi)) > _SPLIT_LIMIT:
        raise FloatOverflowError("operand too large for Veltkamp splitting")
    return _dw(*_dw_mul(a.hi, a.lo, b.hi, b.lo))


def dw_mul_fp(a, y):
    _require_finite(y)
    return _dw(*_dw_mul_fp(a.hi, a.lo, y))


def dw_div(a, b):
    if b.hi == 0.0:
        raise InvalidOperationError("double-word division by zero")
    return _dw(*_dw_div(a.hi, a.lo, b.hi, b.lo))


def dw_sqrt(a):
    if a.hi < 0.0 or (a.hi == 0.0 and a.lo < 0.0):
        raise InvalidOperationError(f"sqrt of negative double-word {a}")
    if a.hi == 0.0:
        return DoubleWord(0.0, 0.0)
    return _dw(*_dw_sqrt(a.hi, a.lo))


# ---------------------------------------------------------------------------
# elementwise double-word arrays
# ---------------------------------------------------------------------------

class DwArray:
    """Elementwise double-word array: value = hi + lo with both parts float64 ndarrays."""

    __array_ufunc__ = None  # make ndarray <op> DwArray defer to our reflected operators

    def __init__(self, hi, lo=None):
        self.hi = np.asarray(hi, dtype=np.float64)
        self.lo = np.zeros_like(self.hi) if lo is None else np.asarray(lo, dtype=np.float64)

    @classmethod
    def lift(cls, x):
        if isinstance(x, DwArray):
            return x
        return cls(np.asarray(x, dtype=np.float64))

    @classmethod
    def zeros(cls, shape):
        return cls(np.zeros(shape), np.zeros(shape))

    @classmethod
    def eye(cls, n):
        return cls(np.eye(n))

    @property
    def shape(self):
        return self.hi.shape

    @property
    def T(self):
        return DwArray(self.hi.T, self.lo.T)

    def copy(self):
        return DwArray(self.hi.copy(), self.lo.copy())

    def to_float(self):
        return self.hi + self.lo

    def check_finite(self):
        _require_finite(self.hi, self.lo)
        return self

    def is_normalized(self):
        return bool(np.all(self.hi + self.lo == self.hi))

    def __getitem__(self, idx):
        return DwArray(self.hi[idx], self.lo[idx])

    def __setitem__(self, idx, value):
        value = DwArray.lift(value)
        self.hi[idx] = value.hi
        self.lo[idx] = value.lo

    def __neg__(self):
        return DwArray(-self.hi, -self.lo)

    def __add__(self, other):
        if isinstance(other, DwArray):
            return DwArray(*_dw_add(self.hi, self.lo, other.hi, other.lo))
        other = np.asarray(other, dtype=np.float64)
        return DwArray(*_dw_add(self.hi, self.lo, other, np.zeros_like(other)))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-DwArray.lift(other))

    def __rsub__(self, other):
        return DwArray.lift(other) + (-self)

    def __mul__(self, other):
        if isinstance(other, DwArray):
            return DwArray(*_dw_mul(self.hi, self.lo, other.hi, other.lo))
        return DwArray(*_dw_mul_fp(self.hi, self.lo, np.asarray(other, dtype=np.float64)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = DwArray.lift(other)
        return DwArray(*_dw_div(self.hi, self.lo, other.hi, other.lo))

    def __rtruediv__(self, other):
        return DwArray.lift(other) / self

    def sqrt(self):
        if np.any(self.hi < 0.0):
            raise InvalidOperationError("sqrt of a negative double-word entry")
        zero = self.hi == 0.0
        safe_hi = np.where(zero, 1.0, self.hi)
        safe_lo = np.where(zero, 0.0, self.lo)
        zh, zl = _dw_sqrt(safe_hi, safe_lo)
        return DwArray(np.where(zero, 0.0, zh), np.where(zero, 0.0, zl))

    def abs(self):
        neg = self.hi < 0.0
        return DwArray(np.where(neg, -self.hi, self.hi), np.where(neg, -self.lo, self.lo))

    @staticmethod
    def where(mask, a, b):
        a = DwArray.lift(a)
        b = DwArray.lift(b)
        return DwArray(np.where(mask, a.hi, b.hi), np.where(mask, a.lo, b.lo))

    def as_fractions(self):
        """Exact values as an object array of Fractions (tests and the rational oracle)."""
        out = np.empty(self.shape, dtype=object)
        for idx in np.ndindex(self.shape):
            out[idx] = Fraction(float(self.hi[idx])) + Fraction(float(self.lo[idx]))
        return out


def pair_add_array(a, acc):
    """Elementwise pair_add: fold a working-precision array into a DwArray accumulator."""
    ch, t = _two_sum(np.asarray(a, dtype=np.float64), acc.hi)
    return DwArray(ch, acc.lo + t)


def dw_matmul(a, b):
    """Double-word matrix product, accumulating rank-one terms in index order.

    A plain float64 operand stays plain so its rank-one terms use the cheaper
    double-word x float kernel.
    """
    if not isinstance(a, DwArray):
        a = np.asarray(a, dtype=np.float64)
        if not isinstance(b, DwArray):
            b = DwArray.lift(b)
    elif not isinstance(b, DwArray):
        b = np.asarray(b, dtype=np.float64)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"inner dimensions differ: {a.shape} x {b.shape}")
    acc = DwArray.zeros((a.shape[0], b.shape[1]))
    for p in range(a.shape[1]):
        acc = acc + a[:, p:p + 1] * b[p:p + 1, :]
    return acc


def dw_dot_columns(x, y):
    """Compensated column-wise dot products sum_k x[k, j] * y[k, j]."""
    x = DwArray.lift(x)
    y = DwArray.lift(y)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    acc = DwArray.zeros(x.shape[1:])
    for k in range(x.shape[0]):
        acc = acc + x[k] * y[k]
    return acc


def check_environment():
    """Round-to-nearest-even, no contraction of TwoSum, no flush-to-zero.

    Returns "ok" or the reason the environment is unsupported.
    """
    if 1.0 + UNIT_ROUNDOFF != 1.0 or (1.0 + 2 * UNIT_ROUNDOFF) + UNIT_ROUNDOFF != 1.0 + 4 * UNIT_ROUNDOFF:
        return "rounding mode is not round-to-nearest, ties-to-even"
    if _two_sum(2.0 ** 53, 1.0) != (2.0 ** 53, 1.0):
        return "TwoSum canary failed: the expression is being contracted or reassociated"
    tiny = np.float64(5e-324)
    if not tiny > 0.0 or not (tiny * 2.0) > tiny:
        return "subnormal numbers are flushed to zero"
    return "ok"
