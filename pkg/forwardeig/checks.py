import numpy as np
import scipy.sparse as sp

from .fpcore import UNIT_ROUNDOFF

MESSAGE_NOT_SQUARE = "Input matrix is not square: shape {shape}."
MESSAGE_NOT_FINITE = "Input matrix contains NaN or Inf entries."
MESSAGE_NOT_SYMMETRIC = "Input matrix is not exactly symmetric (largest |a_ij - a_ji| = {gap:.3e})."
MESSAGE_DELTA_BELOW_U = "delta below unit roundoff: delta = {delta!r}, u = 2**-53."
MESSAGE_COLUMN_NORM = "Column {j} of X has 2-norm {norm:.3e}, outside [0.5, 1.5]."
MESSAGE_CLUSTERED = (
    "Eigenvalue estimates {i} and {j} are clustered: |{lj!r} - {li!r}| < gap_floor * max|lambda| = {floor:.3e}."
)


def _data(A):
    return A.data if sp.issparse(A) else np.asarray(A)


def check_square(A):
    if len(A.shape) != 2 or A.shape[0] != A.shape[1]:
        return MESSAGE_NOT_SQUARE.format(shape=A.shape)
    return "ok"


def check_finite(A):
    if not np.all(np.isfinite(_data(A))):
        return MESSAGE_NOT_FINITE
    return "ok"


def check_symmetric(A):
    result = check_square(A)
    if result != "ok":
        return result
    gap = float(np.max(np.abs(_data(A - A.T)), initial=0.0))
    if gap != 0.0:
        return MESSAGE_NOT_SYMMETRIC.format(gap=gap)
    return "ok"


def check_delta(delta):
    if not delta > UNIT_ROUNDOFF:
        return MESSAGE_DELTA_BELOW_U.format(delta=delta)
    return "ok"


def check_column_norms(X):
    norms = np.linalg.norm(X, axis=0)
    bad = np.flatnonzero((norms < 0.5) | (norms > 1.5))
    if bad.size:
        j = int(bad[0])
        return MESSAGE_COLUMN_NORM.format(j=j, norm=float(norms[j]))
    return "ok"


def check_gaps(lam, gap_floor):
    """Adjacent sorted eigenvalue estimates must be at least gap_floor * max|lambda| apart."""
    lam = np.asarray(lam, dtype=np.float64)
    if lam.size < 2:
        return "ok"
    order = np.argsort(lam, kind="stable")
    sorted_lam = lam[order]
    floor = gap_floor * float(np.max(np.abs(lam)))
    gaps = np.diff(sorted_lam)
    bad = np.flatnonzero(gaps < floor) if floor > 0 else np.flatnonzero(gaps <= 0)
    if bad.size:
        k = int(bad[0])
        i, j = int(order[k]), int(order[k + 1])
        return MESSAGE_CLUSTERED.format(i=i, j=j, li=float(lam[i]), lj=float(lam[j]), floor=floor)
    return "ok"


def require(result, error_class):
    """Raise error_class(result) unless a check_* helper returned "ok"."""
    if result != "ok":
        raise error_class(result)
