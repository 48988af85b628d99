"""Exactness suites run by ``forwardeig verify``.

Each suite draws seeded random inputs, checks a property against exact
arithmetic (math.fsum, Fraction or the scaled-integer product) and counts
passes and failures.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List

import numpy as np

from util import get_logger
from .fpcore import UNIT_ROUNDOFF, two_prod, two_sum, ufp
from .matgen import GenSpec, randsvd_sym
from .oracle import RationalMatrix, rational_matmul
from .ozaki import accmul_fixed_k, split_cols, split_rows, two_sided_exponent
from .ozaki_constant import FIXED_K_CHOICES

logger = get_logger(__name__)

SUITES = ("eft", "split", "gemm")
EFT_PAIRS = 1_000_000
TWO_PROD_PAIRS = 10_000
SPLIT_MATRICES = 200
SPLIT_ALPHAS = (17, 27, 40)
SLICE_PRODUCT_SIZES = (4, 16, 64)
SLICE_PRODUCT_TRIALS = 4
SLICE_PRODUCT_SLICES = 3
GEMM_SIZES = (8, 32, 64)
GEMM_COND = 1e10
GEMM_K3_FACTOR = 8.0
# fixed-k errors below this multiple of n * u**2 * max|AB| are accumulation noise
GEMM_NOISE_FACTOR = 4.0
MAX_FAILURES_KEPT = 10


@dataclass
class SuiteResult:
    name: str
    passed: int = 0
    failed: int = 0
    failures: List[str] = field(default_factory=list)

    @property
    def ok(self):
        return self.failed == 0

    def record(self, condition, detail):
        if condition:
            self.passed += 1
        else:
            self.failed += 1
            if len(self.failures) < MAX_FAILURES_KEPT:
                self.failures.append(detail)


def _spread(rng, shape, lo, hi):
    return np.ldexp(rng.standard_normal(shape), rng.integers(lo, hi + 1, size=shape))


def verify_eft(seed=1, pairs=EFT_PAIRS):
    """two_sum on ``pairs`` random pairs, two_prod on a subset, both checked exactly."""
    result = SuiteResult("eft")
    rng = np.random.Generator(np.random.PCG64(seed))
    a = _spread(rng, pairs, -60, 60)
    b = _spread(rng, pairs, -60, 60)
    s, e = two_sum(a, b)
    for i in range(pairs):
        # fsum is correctly rounded, so it returns 0 exactly when a + b - s - e == 0
        if math.fsum((a[i], b[i], -s[i], -e[i])) == 0.0:
            result.passed += 1
        else:
            result.record(False, f"two_sum({a[i]!r}, {b[i]!r}) = ({s[i]!r}, {e[i]!r})")
    for i in range(min(TWO_PROD_PAIRS, pairs)):
        x, y = float(a[i]), float(b[i])
        p, q = two_prod(x, y)
        result.record(Fraction(x) * Fraction(y) == Fraction(p) + Fraction(q), f"two_prod({x!r}, {y!r}) = ({p!r}, {q!r})")
    return result


def verify_split(seed=1, count=SPLIT_MATRICES):
    """Exact reconstruction and the per-row remainder bound |rem_ij| <= u * ufp(sigma_i)."""
    result = SuiteResult("split")
    rng = np.random.Generator(np.random.PCG64(seed))
    for t in range(count):
        n = int(rng.integers(1, 65))
        A = _spread(rng, (n, n), -20, 20)
        alpha = SPLIT_ALPHAS[t % len(SPLIT_ALPHAS)]
        split = split_rows(A, alpha)
        total = RationalMatrix.from_float(split.remainder)
        for piece in split.slices:
            total = total + RationalMatrix.from_float(piece)
        result.record(total.equals(A), f"matrix {t}: n={n}, alpha={alpha} does not reconstruct")
        if split.shifts:
            bound = UNIT_ROUNDOFF * ufp(split.shifts[-1])
            within = np.all(np.abs(split.remainder) <= bound[:, None])
        else:
            within = not np.any(split.remainder)
        result.record(bool(within), f"matrix {t}: n={n}, alpha={alpha} remainder exceeds u * ufp(sigma)")
    return result


def verify_slice_products(seed=1, sizes=SLICE_PRODUCT_SIZES, trials=SLICE_PRODUCT_TRIALS):
    """fl(A^(r) X^(s)) equals the exact product for every pair of slices."""
    result = SuiteResult("slice-products")
    rng = np.random.Generator(np.random.PCG64(seed))
    for n in sizes:
        exponent = two_sided_exponent(n)
        for t in range(trials):
            A = _spread(rng, (n, n), -20, 20)
            X = _spread(rng, (n, n), -5, 5)
            a = split_rows(A, exponent, SLICE_PRODUCT_SLICES)
            x = split_cols(X, exponent, SLICE_PRODUCT_SLICES)
            for r, piece in enumerate(a.slices):
                for s, xs in enumerate(x.slices):
                    exact = rational_matmul(piece, xs).equals(piece @ xs)
                    result.record(exact, f"n={n} trial {t}: fl(A^({r + 1}) X^({s + 1})) is inexact")
    return result


def verify_gemm(seed=1, sizes=GEMM_SIZES):
    """Fixed-k products against the exact product: k=3 within 8u max|AB|, error non-increasing in k."""
    result = SuiteResult("gemm")
    rng = np.random.Generator(np.random.PCG64(seed))
    for n in sizes:
        A = randsvd_sym(GenSpec(n=n, cond=GEMM_COND, seed=seed + n))
        B = rng.standard_normal((n, n))
        C = rational_matmul(A, B)
        scale = C.abs_max()
        errors = {}
        for k in FIXED_K_CHOICES:
            errors[k] = (RationalMatrix.from_dw(accmul_fixed_k(A, B, k)) - C).abs_max()
        result.record(
            errors[3] <= GEMM_K3_FACTOR * UNIT_ROUNDOFF * scale,
            f"n={n}: k=3 error {errors[3]:.3e} > {GEMM_K3_FACTOR}u max|AB| = {GEMM_K3_FACTOR * UNIT_ROUNDOFF * scale:.3e}",
        )
        noise = GEMM_NOISE_FACTOR * n * UNIT_ROUNDOFF ** 2 * scale
        for k in FIXED_K_CHOICES[:-1]:
            result.record(
                errors[k + 1] <= max(errors[k], noise),
                f"n={n}: error(k={k + 1}) = {errors[k + 1]:.3e} > error(k={k}) = {errors[k]:.3e}",
            )
    return result


def run_suites(names, seed=1):
    """Run the named suites ("eft", "split", "gemm" or "all"); gemm includes the slice-product check."""
    if "all" in names:
        names = SUITES
    results = []
    for name in names:
        if name == "eft":
            results.append(verify_eft(seed))
        elif name == "split":
            results.append(verify_split(seed))
        elif name == "gemm":
            results.append(verify_slice_products(seed))
            results.append(verify_gemm(seed))
        else:
            raise ValueError(f"unknown suite {name!r}, expected one of {SUITES + ('all',)}")
    for r in results:
        log = logger.info if r.ok else logger.error
        log(f"{r.name}: {r.passed} passed, {r.failed} failed")
        for detail in r.failures:
            logger.error(f"  {detail}")
    return results
