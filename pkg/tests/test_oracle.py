from fractions import Fraction

import numpy as np
import pytest

from forwardeig.fpcore import UNIT_ROUNDOFF, DwArray
from forwardeig.jacobi import NotSymmetricError
from forwardeig.oracle import (
    MatchingAmbiguityError,
    OracleSizeError,
    RationalMatrix,
    backward_errors,
    forward_error,
    fraction_matmul,
    rational_matmul,
    reference_eig,
    sturm_count,
)
from forwardeig.refine import EigenApprox

U = UNIT_ROUNDOFF


class TestExactProducts:
    def test_third_times_three(self):
        C = rational_matmul(np.array([[1 / 3]]), np.array([[3.0]]))
        assert C.to_fractions()[0, 0] == Fraction(6004799503160661, 2 ** 54) * 3

    def test_flavours_agree(self, rng):
        for _ in range(50):
            m, k, n = rng.integers(1, 6, size=3)
            A = np.ldexp(rng.standard_normal((m, k)), rng.integers(-30, 30, size=(m, k)))
            B = np.ldexp(rng.standard_normal((k, n)), rng.integers(-30, 30, size=(k, n)))
            assert (rational_matmul(A, B).to_fractions() == fraction_matmul(A, B)).all()

    def test_size_cap(self):
        with pytest.raises(OracleSizeError):
            rational_matmul(np.zeros((2, 3)), np.zeros((3, 2)), cap=2)
        with pytest.raises(OracleSizeError):
            fraction_matmul(np.zeros((3, 3)), np.zeros((3, 3)), cap=2)

    def test_double_word_round_trip(self):
        D = DwArray(np.array([[1.0, 3.0]]), np.array([[2.0 ** -60, -(2.0 ** -55)]]))
        exact = RationalMatrix.from_dw(D).to_fractions()
        assert exact[0, 0] == 1 + Fraction(1, 2 ** 60)
        assert exact[0, 1] == 3 - Fraction(1, 2 ** 55)
        assert RationalMatrix.from_dw(D).equals(D)
        assert not RationalMatrix.from_float(D.hi).equals(D)

    def test_abs_max_and_rounding(self):
        R = RationalMatrix.from_float(np.array([[-4.0, 0.5], [0.0, 2.0 ** -40]]))
        assert R.abs_max() == 4.0
        np.testing.assert_array_equal(R.to_float(), [[-4.0, 0.5], [0.0, 2.0 ** -40]])


def wilkinson_plus(n=21):
    m = (n - 1) // 2
    return np.abs(np.arange(n) - m).astype(float), np.ones(n - 1)


class TestSturmCount:
    def test_matches_eigenvalues(self):
        diag, off = wilkinson_plus()
        T = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
        eigs = np.linalg.eigvalsh(T)
        for x in np.linspace(-2.0, 12.0, 57):
            if np.min(np.abs(eigs - x)) < 1e-8:
                continue
            assert sturm_count(diag, off, x) == int(np.sum(eigs < x))

    def test_brackets_reference_eigenvalues(self):
        diag, off = wilkinson_plus()
        T = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
        lam = reference_eig(T).lam.as_fractions()
        tol = Fraction(1, 10 ** 24)
        # the two largest eigenvalues agree to about 1e-14
        assert lam[-1] - lam[-2] < Fraction(1, 10 ** 12)
        for i, x in enumerate(lam):
            assert sturm_count(diag, off, x - tol) == i
            assert sturm_count(diag, off, x + tol) == i + 1

    def test_zero_pivot(self):
        # [[0, 1], [1, 0]] has eigenvalues -1 and 1
        assert sturm_count([0.0, 0.0], [1.0], 0.0) == 1
        assert sturm_count([0.0, 0.0], [1.0], 1.5) == 2
        assert sturm_count([0.0, 0.0], [1.0], -1.5) == 0

    def test_decoupled(self):
        assert sturm_count([1.0, 3.0], [0.0], 2.0) == 1


class TestReferenceEig:
    def test_diagonal(self):
        ref = reference_eig(np.diag([3.0, 1.0, 2.0]))
        np.testing.assert_array_equal(ref.lam.hi, [1.0, 2.0, 3.0])
        np.testing.assert_array_equal(ref.lam.lo, 0.0)
        np.testing.assert_array_equal(np.abs(ref.X.to_float()), np.eye(3)[:, [1, 2, 0]])

    @pytest.mark.parametrize("warm_start", [True, False])
    def test_two_by_two(self, warm_start):
        ref = reference_eig(np.array([[2.0, 1.0], [1.0, 2.0]]), warm_start=warm_start)
        lam = ref.lam.as_fractions()
        assert abs(lam[0] - 1) <= Fraction(1, 2 ** 96)
        assert abs(lam[1] - 3) <= Fraction(1, 2 ** 96)
        np.testing.assert_allclose(np.abs(ref.X.to_float()), np.sqrt(0.5), rtol=4 * U)

    def test_residual_is_double_word_small(self, sym4):
        ref = reference_eig(sym4)
        assert ref.margin <= 1e3
        assert ref.orthogonality <= 1e3 * 4 * U ** 2
        np.testing.assert_allclose(ref.lam.to_float(), np.linalg.eigvalsh(sym4), rtol=1e-14)

    def test_size_cap(self):
        with pytest.raises(OracleSizeError):
            reference_eig(np.eye(3), cap=2)

    def test_rejects_asymmetric(self):
        with pytest.raises(NotSymmetricError):
            reference_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))


class TestErrorMetrics:
    def test_rounded_reference_is_within_n_u(self, sym4):
        ref = reference_eig(sym4)
        approx = EigenApprox(ref.X.to_float(), ref.lam.to_float())
        assert ref.forward_error(approx) <= 4 * U

    def test_sign_invariance(self, sym4):
        ref = reference_eig(sym4)
        X = ref.X.to_float()
        approx = EigenApprox(X, ref.lam.to_float())
        flipped = EigenApprox(X * np.array([1.0, -1.0, -1.0, 1.0]), ref.lam.to_float())
        assert ref.forward_error(approx) == ref.forward_error(flipped)

    def test_ambiguous_matching(self):
        approx = EigenApprox(np.eye(2), [1.0, 2.9])
        with pytest.raises(MatchingAmbiguityError):
            forward_error(np.eye(2), np.array([1.0, 2.0]), approx)

    def test_backward_errors_of_scaled_identity(self):
        approx = EigenApprox(2.0 * np.eye(2), [1.0, 1.0])
        orth, diag = backward_errors(np.eye(2), approx)
        assert orth == pytest.approx(3.0)
        assert diag == pytest.approx(3.0)

    def test_metrics_without_backward(self, sym4):
        ref = reference_eig(sym4)
        ref.backward = False
        approx = EigenApprox(ref.X.to_float(), ref.lam.to_float())
        assert set(ref.metrics(sym4, approx)) == {"forward_error"}
