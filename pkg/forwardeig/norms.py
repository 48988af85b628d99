import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import norm as sparse_norm

POWER_ITERATION_STEPS = 20
POWER_ITERATION_SEED = 15210


def norm2(M, steps=POWER_ITERATION_STEPS, seed=POWER_ITERATION_SEED):
    """Estimate ||M||_2 by power iteration on M^T M from a seeded random start.

    Deterministic for a fixed seed; about three correct digits after 20 steps,
    which is all the error reports need.
    """
    if M.shape[0] == 0 or M.shape[1] == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(M.shape[1])
    x /= np.linalg.norm(x)
    sigma = 0.0
    for _ in range(steps):
        y = M @ x
        sigma = float(np.linalg.norm(y))
        if sigma == 0.0:
            return 0.0
        z = M.T @ y
        znorm = np.linalg.norm(z)
        if znorm == 0.0:
            break
        x = z / znorm
    return max(sigma, float(np.linalg.norm(M @ x)))


def frobenius(M):
    if sp.issparse(M):
        return float(sparse_norm(M))
    return float(np.linalg.norm(M))
