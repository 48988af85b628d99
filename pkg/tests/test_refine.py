import numpy as np
import pytest
import scipy.sparse as sp

from forwardeig.cli import figure1
from forwardeig.cli_constant import FIG1_CONDS
from forwardeig.fpcore import UNIT_ROUNDOFF
from forwardeig.jacobi import NotSymmetricError
from forwardeig.logic import MachineState, state_machine
from forwardeig.matgen import make_spec, randsvd_sym
from forwardeig.oracle import forward_error, reference_eig
from forwardeig.refine import (
    ClusteredEigenvaluesError,
    ConvergenceHistory,
    DegenerateColumnError,
    EigenApprox,
    InvalidConfigError,
    PlainProduct,
    StateCheckStop,
    StateConverged,
    StateMaxIter,
    StateStagnated,
    StepRecord,
    baseline_eig,
    build_correction,
    make_config,
    refine_fixed_k,
    refine_step,
    refine_to_delta,
    residual_terms,
)
from forwardeig.refine_constant import STOP_ERROR, STOP_FIXED, STOP_MAX_ITER, STOP_STAGNATION, STOP_TARGET
from conftest import rotation

U = UNIT_ROUNDOFF


def identity_approx(lam):
    return EigenApprox(np.eye(len(lam)), np.asarray(lam, dtype=np.float64))


def record(iteration, effective, predicted=1.0, resolution=0.0):
    return StepRecord(
        iteration=iteration, mode="dense", n_a=2, multiplications=4, min_gap=1.0, max_abs_eig=1.0,
        correction_fro=effective, correction_norm2=effective, effective_correction=effective,
        predicted_error=predicted, resolution=resolution,
    )


class TestEigenApprox:
    def test_requires_sorted_eigenvalues(self):
        with pytest.raises(ValueError):
            EigenApprox(np.eye(2), [2.0, 1.0])

    def test_from_unsorted_sorts_and_normalises(self):
        approx = EigenApprox.from_unsorted(np.array([[0.0, -1.0], [1.0, 0.0]]), [2.0, 1.0])
        np.testing.assert_array_equal(approx.lam, [1.0, 2.0])
        np.testing.assert_array_equal(approx.X, [[1.0, 0.0], [0.0, 1.0]])

    def test_is_read_only(self):
        approx = identity_approx([1.0, 2.0])
        with pytest.raises(ValueError):
            approx.X[0, 0] = 3.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            EigenApprox(np.eye(3), [1.0, 2.0])


class TestConfig:
    def test_defaults(self):
        cfg = make_config(delta=1e-8)
        assert (cfg.mode, cfg.k, cfg.max_iter) == ("dense", 3, 10)

    def test_delta_below_unit_roundoff(self):
        with pytest.raises(InvalidConfigError, match="delta below unit roundoff"):
            make_config(delta=1e-20)

    @pytest.mark.parametrize("kwargs", [
        dict(k=5), dict(mode="two-sided"), dict(max_iter=0), dict(xi=-1.0), dict(n_a=0), dict(bogus=1),
    ])
    def test_rejects(self, kwargs):
        with pytest.raises(InvalidConfigError):
            make_config(delta=1e-8, **kwargs)


class TestBaseline:
    def test_diagonal(self):
        approx = baseline_eig(np.diag([1.0, 2.0, 3.0]))
        np.testing.assert_array_equal(approx.lam, [1.0, 2.0, 3.0])
        np.testing.assert_array_equal(approx.X, np.eye(3))

    def test_swap_matrix(self):
        approx = baseline_eig(np.array([[0.0, 1.0], [1.0, 0.0]]))
        np.testing.assert_allclose(approx.lam, [-1.0, 1.0], atol=4 * U)
        h = 1 / np.sqrt(2)
        np.testing.assert_allclose(np.abs(approx.X), [[h, h], [h, h]], atol=4 * U)

    def test_lapack_agrees(self, sym4):
        jacobi = baseline_eig(sym4, method="jacobi")
        lapack = baseline_eig(sym4, method="lapack")
        np.testing.assert_allclose(jacobi.lam, lapack.lam, atol=1e-14)
        np.testing.assert_allclose(jacobi.X, lapack.X, atol=1e-13)

    def test_rejects_asymmetric(self):
        with pytest.raises(NotSymmetricError):
            baseline_eig(np.array([[1.0, 2.0], [3.0, 1.0]]))

    def test_unknown_method(self, sym4):
        with pytest.raises(ValueError):
            baseline_eig(sym4, method="qr")


class TestResidualTerms:
    def test_fixed_point(self):
        terms = residual_terms(np.diag([1.0, 2.0]), identity_approx([1.0, 2.0]), PlainProduct())
        np.testing.assert_array_equal(terms.r, 0.0)
        np.testing.assert_array_equal(terms.lam, [1.0, 2.0])
        np.testing.assert_array_equal(terms.W, 0.0)

    def test_scaled_column(self):
        X = np.eye(2)
        X[0, 0] = 1.0 + 2.0 ** -30
        terms = residual_terms(np.diag([1.0, 2.0]), EigenApprox(X, [1.0, 2.0]), PlainProduct())
        assert terms.r[0] == -(2.0 ** -29 + 2.0 ** -60)
        assert terms.r[1] == 0.0
        assert terms.lam[0] == 1.0

    def test_zero_matrix(self):
        X = rotation(0.3)
        terms = residual_terms(np.zeros((2, 2)), EigenApprox(X, [1.0, 2.0]), PlainProduct())
        np.testing.assert_array_equal(terms.lam, 0.0)
        np.testing.assert_array_equal(terms.W, 0.0)

    def test_degenerate_column(self):
        X = np.array([[1.0, 0.0], [0.0, 0.0]])
        with pytest.raises(DegenerateColumnError):
            residual_terms(np.eye(2), EigenApprox(X, [1.0, 2.0]), PlainProduct())


class TestBuildCorrection:
    def test_zero(self):
        E = build_correction(np.zeros(3), np.zeros((3, 3)), [1.0, 2.0, 3.0]).E
        np.testing.assert_array_equal(E, 0.0)

    def test_two_by_two(self):
        W = np.array([[0.0, 0.0], [3e-5, 0.0]])
        E = build_correction(np.array([2e-4, 0.0]), W, [1.0, 2.0]).E
        assert E[0, 0] == 1e-4
        # w_21 / (lam_1 - lam_2)
        assert E[1, 0] == -3e-5
        assert E[0, 1] == 0.0 and E[1, 1] == 0.0

    def test_diagonal_and_off_diagonal_rules(self, rng):
        lam = np.array([0.0, 1.0, 2.0])
        r = rng.standard_normal(3) * 1e-8
        W = rng.standard_normal((3, 3)) * 1e-8
        E = build_correction(r, W, lam).E
        np.testing.assert_array_equal(np.diag(E), r / 2)
        for i in range(3):
            for j in range(3):
                if i != j:
                    assert E[i, j] * (lam[j] - lam[i]) == W[i, j]

    def test_clustered(self):
        with pytest.raises(ClusteredEigenvaluesError, match="0 and 1"):
            build_correction(np.zeros(2), np.zeros((2, 2)), [1.0, 1.0])


class TestRefineStep:
    def test_diagonal_fixed_point(self):
        A = np.diag([1.0, 2.0, 3.0])
        new, rec = refine_step(A, identity_approx([1.0, 2.0, 3.0]), make_config(delta=1e-10))
        assert rec.correction_fro <= 10 * U
        np.testing.assert_allclose(new.X, np.eye(3), atol=U)
        assert rec.alpha is not None and rec.beta is not None
        assert rec.multiplications == rec.n_a + 2
        assert rec.elapsed is not None

    def test_rotation_is_undone(self):
        theta = 1e-4
        A = np.diag([1.0, 2.0])
        X = rotation(-theta)
        approx = EigenApprox(X, [1.0, 2.0])
        terms = residual_terms(A, approx, PlainProduct())
        E = build_correction(terms.r, terms.W, terms.lam).E
        assert E[1, 0] == pytest.approx(theta, rel=1e-4)
        assert E[0, 1] == pytest.approx(-theta, rel=1e-4)
        new, _ = refine_step(A, approx, make_config(delta=1e-12))
        assert forward_error(np.eye(2), np.array([1.0, 2.0]), new) <= 1e-8

    @pytest.mark.parametrize("k", [2, 3, 4])
    def test_fixed_k_step(self, sym4, k):
        approx = baseline_eig(sym4)
        new, rec = refine_step(sym4, approx, make_config(delta=1e-12, mode="fixed_k", k=k))
        assert rec.n_a == k and rec.alpha is None
        assert rec.multiplications == k * (k + 1) // 2 + 2
        ref = reference_eig(sym4)
        assert ref.forward_error(new) <= 1e-14

    @pytest.mark.parametrize("mode", ["fixed_k", "theoretical", "dense", "sparse"])
    def test_near_solution_changes_nothing_above_rounding(self, sym4, mode):
        ref = reference_eig(sym4)
        approx = EigenApprox(ref.X.to_float(), ref.lam.to_float())
        new, _ = refine_step(sym4, approx, make_config(delta=1e-10, mode=mode))
        assert np.max(np.abs(new.X - approx.X)) <= 4 * U

    def test_update_inside_resolution_is_not_applied(self, sym4):
        ref = reference_eig(sym4)
        approx = EigenApprox(ref.X.to_float(), ref.lam.to_float())
        new, rec = refine_step(sym4, approx, make_config(delta=1e-6))
        assert rec.truncation_fro > 0 and rec.resolution == 1e-6
        assert not rec.applied
        assert new is approx

    def test_untruncated_step_has_no_resolution(self):
        A = np.diag([1.0, 2.0, 3.0])
        _, rec = refine_step(A, identity_approx([1.0, 2.0, 3.0]), make_config(delta=1e-10))
        assert rec.truncation_fro == 0.0
        assert rec.resolution == 0.0 and rec.applied

    def test_one_by_one(self):
        A = np.array([[2.0]])
        X = np.array([[1.0 + 2.0 ** -30]])
        new, rec = refine_step(A, EigenApprox(X, [2.0]), make_config(delta=1e-8))
        assert rec.beta is None and rec.n_a == 3
        assert rec.min_gap == np.inf and rec.predicted_error == 0.0
        assert abs(new.X[0, 0] - 1.0) <= 2.0 ** -58
        assert new.lam[0] == pytest.approx(2.0, rel=1e-15)


class TestStopRule:
    def run_check(self, records, max_iter=10, delta=1e-8):
        mystate = MachineState(entry_state=StateCheckStop)
        memory = dict(cfg=make_config(delta=delta, max_iter=max_iter), records=records, iteration=len(records))
        state_machine.reset(mystate, memory=memory)
        return state_machine.loop(mystate), mystate.memory.get("stop_reason")

    def test_target_met(self):
        assert self.run_check([record(1, 1e-3), record(2, 4e-9)]) == (StateConverged, STOP_TARGET)

    def test_predicted_error_met(self):
        assert self.run_check([record(1, 1e-3, predicted=1e-9)]) == (StateConverged, "predicted")

    def test_stagnation(self):
        records = [record(1, 1e-3), record(2, 1e-3), record(3, 2e-3)]
        assert self.run_check(records) == (StateStagnated, STOP_STAGNATION)

    def test_max_iter(self):
        records = [record(1, 1e-2), record(2, 1e-3)]
        assert self.run_check(records, max_iter=2) == (StateMaxIter, STOP_MAX_ITER)

    def test_resolution_widens_target(self):
        records = [record(1, 1e-3), record(2, 1.2e-8, resolution=1e-8)]
        assert self.run_check(records) == (StateConverged, STOP_TARGET)


class TestRefineToDelta:
    def test_exact_start_stops_after_one_step(self):
        A = np.diag([1.0, 2.0, 3.0])
        approx, history = refine_to_delta(A, baseline_eig(A), make_config(delta=1e-10))
        assert history.converged
        assert history.stop_reason == STOP_TARGET
        assert len(history.records) == 1
        np.testing.assert_array_equal(approx.lam, [1.0, 2.0, 3.0])

    def test_repeated_eigenvalues_end_with_error(self):
        A = np.eye(3)
        approx, history = refine_to_delta(A, identity_approx([1.0, 1.0, 1.0]), make_config(delta=1e-10))
        assert not history.converged
        assert history.stop_reason == STOP_ERROR
        assert "gap" in history.message
        np.testing.assert_array_equal(approx.X, np.eye(3))

    def test_one_by_one(self):
        A = np.array([[2.0]])
        approx, history = refine_to_delta(A, baseline_eig(A), make_config(delta=1e-8))
        assert history.converged
        np.testing.assert_array_equal(approx.X, [[1.0]])
        np.testing.assert_array_equal(approx.lam, [2.0])

    def test_sparse_mode(self):
        A = sp.diags([[0.5] * 5, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0], [0.5] * 5], [-1, 0, 1]).tocsr()
        approx, history = refine_to_delta(A, baseline_eig(A), make_config(delta=1e-12, mode="sparse"))
        assert history.converged
        ref = reference_eig(A)
        assert ref.forward_error(approx) <= 1e-11

    def test_rejects_bad_start(self, sym4):
        bad = EigenApprox(np.eye(4) * 3.0, [1.0, 2.0, 3.0, 4.0])
        with pytest.raises(DegenerateColumnError):
            refine_to_delta(sym4, bad, make_config(delta=1e-8))

    def test_history_serialises(self, sym4):
        _, history = refine_to_delta(sym4, baseline_eig(sym4), make_config(delta=1e-12))
        restored = ConvergenceHistory.model_validate_json(history.model_dump_json())
        assert restored == history


def test_fixed_k_zero_iterations(sym4):
    X0 = baseline_eig(sym4)
    approx, history = refine_fixed_k(sym4, X0, 3, 0)
    assert approx is X0
    assert history.records == [] and history.stop_reason == STOP_FIXED


@pytest.fixture(scope="module")
def targeting_problem():
    A = randsvd_sym(make_spec(n=100, cond=1e10, seed=7))
    return A, baseline_eig(A), reference_eig(A)


def _inversions(values):
    return sum(1 for a, b in zip(values, values[1:]) if b < a)


@pytest.mark.slow
class TestTargeting:
    def test_baseline_error_grows_with_condition(self, targeting_problem):
        A, X0, ref = targeting_problem
        assert 1e-8 <= ref.forward_error(X0) <= 1e-4
        orth, diag = ref.metrics(A, X0)["orth_backward"], ref.metrics(A, X0)["diag_backward"]
        assert orth <= 1e-13 and diag <= 1e-13

    @pytest.mark.parametrize("delta", [1e-6, 1e-10])
    def test_dense_mode_meets_delta(self, targeting_problem, delta):
        A, X0, ref = targeting_problem
        approx, history = refine_to_delta(A, X0, make_config(delta=delta, mode="dense"), oracle=ref)
        assert history.converged
        assert ref.forward_error(approx) <= 10 * delta
        if delta == 1e-6:
            assert len(history.records) <= 3

    @pytest.mark.parametrize("mode", ["theoretical", "dense"])
    def test_noise_level_corrections_do_not_stagnate(self, targeting_problem, mode):
        A, X0, ref = targeting_problem
        approx, history = refine_to_delta(A, X0, make_config(delta=1e-6, mode=mode, max_iter=10))
        assert history.stop_reason != STOP_STAGNATION
        assert history.converged and len(history.records) <= 3
        assert ref.forward_error(approx) <= 10 * 1e-6

    def test_corrections_decrease(self, targeting_problem):
        A, X0, ref = targeting_problem
        _, history = refine_to_delta(A, X0, make_config(delta=1e-10, mode="dense"))
        corrections = [r.correction_fro for r in history.records]
        assert all(b < a for a, b in zip(corrections, corrections[1:]))

    def test_fixed_k_three_slices(self, targeting_problem):
        A, X0, ref = targeting_problem
        approx, history = refine_fixed_k(A, X0, 3, 2, oracle=ref)
        assert ref.forward_error(approx) <= 1e-10
        assert history.records[-1].forward_error == pytest.approx(ref.forward_error(approx))


@pytest.mark.slow
def test_baseline_across_condition_numbers():
    df = figure1(100, FIG1_CONDS, seed=7)
    assert (df["orth_backward"] <= 1e-13).all()
    assert (df["diag_backward"] <= 1e-13).all()
    assert df.loc[df["cond"] == 1e10, "forward_error"].iloc[0] >= 1e-8
    assert _inversions(list(df["forward_error"])) <= 1


@pytest.mark.slow
def test_delta_grid():
    errors = []
    for cond in (1e2, 1e6, 1e10):
        A = randsvd_sym(make_spec(n=100, cond=cond, seed=7))
        X0, ref = baseline_eig(A), reference_eig(A)
        for delta in (1e-6, 1e-10):
            approx, history = refine_to_delta(A, X0, make_config(delta=delta))
            assert history.converged, (cond, delta, history.stop_reason)
            error = ref.forward_error(approx)
            assert error <= 10 * delta, (cond, delta, error)
            errors.append((error, delta))
    # at least half the cells land within three decades of delta
    assert 2 * sum(1 for error, delta in errors if error >= delta / 1e3) >= len(errors)


@pytest.mark.slow
def test_large_problem_iteration_counts():
    A = randsvd_sym(make_spec(n=512, cond=1e10, seed=7))
    X0, ref = baseline_eig(A), reference_eig(A)
    approx, history = refine_to_delta(A, X0, make_config(delta=1e-10))
    assert history.converged and len(history.records) <= 3
    assert ref.forward_error(approx) <= 1e-9
    corrections = [r.correction_fro for r in history.records]
    assert all(b < a for a, b in zip(corrections, corrections[1:]))
    fixed, _ = refine_fixed_k(A, X0, 3, 2)
    assert ref.forward_error(fixed) <= 1e-10


@pytest.mark.slow
@pytest.mark.parametrize("n", [50, 100])
def test_quadratic_convergence(n):
    A = randsvd_sym(make_spec(n=n, cond=1e2, seed=5, mode="arithmetic"))
    ref = reference_eig(A)
    X, lam = ref.X.to_float(), ref.lam.to_float()
    G = np.random.default_rng(n).standard_normal((n, n))
    G /= np.linalg.norm(G, 2)
    cfg = make_config(delta=1e-15, mode="fixed_k", k=3)
    before, after = [], []
    for eps in (1e-4, 1e-5, 1e-6):
        start = EigenApprox(X + eps * G, lam)
        new, _ = refine_step(A, start, cfg)
        before.append(ref.forward_error(start))
        after.append(ref.forward_error(new))
    assert min(before) >= 100 * n * U
    slope = np.polyfit(np.log(before), np.log(after), 1)[0]
    assert slope >= 1.7, (before, after)
