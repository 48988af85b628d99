import numpy as np
import pytest
import scipy.sparse as sp

from forwardeig.norms import frobenius, norm2


def test_norm2_of_diagonal():
    assert norm2(np.diag([3.0, -7.0, 1.0]), steps=60) == pytest.approx(7.0, rel=1e-6)


def test_norm2_close_to_svd(rng):
    M = rng.standard_normal((30, 20))
    exact = np.linalg.norm(M, 2)
    estimate = norm2(M)
    assert estimate <= exact * (1 + 1e-12)
    assert estimate >= 0.5 * exact


def test_norm2_is_deterministic(rng):
    M = rng.standard_normal((10, 10))
    assert norm2(M) == norm2(M)


def test_norm2_degenerate():
    assert norm2(np.zeros((4, 4))) == 0.0
    assert norm2(np.zeros((0, 3))) == 0.0


def test_frobenius_sparse_matches_dense(rng):
    M = rng.standard_normal((6, 6))
    M[np.abs(M) < 0.8] = 0.0
    assert frobenius(sp.csr_matrix(M)) == pytest.approx(frobenius(M), rel=1e-15)
    assert frobenius(np.eye(4)) == 2.0
