import pytest

from forwardeig.verify import (
    SuiteResult,
    run_suites,
    verify_eft,
    verify_gemm,
    verify_slice_products,
    verify_split,
)


def test_suite_result_keeps_first_failures():
    result = SuiteResult("x")
    for i in range(20):
        result.record(i % 2 == 0, f"case {i}")
    assert (result.passed, result.failed) == (10, 10)
    assert len(result.failures) == 10 and result.failures[0] == "case 1"
    assert not result.ok


def test_eft():
    result = verify_eft(seed=3, pairs=5000)
    assert result.ok
    assert result.passed == 5000 + 5000


def test_split():
    result = verify_split(seed=3, count=20)
    assert result.ok and result.passed == 40


def test_slice_products():
    result = verify_slice_products(seed=3, sizes=(4, 16), trials=1)
    assert result.ok and result.passed > 0


def test_gemm():
    result = verify_gemm(seed=3, sizes=(8, 16))
    assert result.ok and result.passed == 2 * 3


def test_unknown_suite():
    with pytest.raises(ValueError):
        run_suites(["fft"])


@pytest.mark.slow
def test_all_suites_pass():
    assert all(r.ok for r in run_suites(["all"]))
