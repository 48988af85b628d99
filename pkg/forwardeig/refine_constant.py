DEFAULT_MODE = "dense"
DEFAULT_MAX_ITER = 10
MAX_ITER_LIMIT = 100
DEFAULT_GAP_FLOOR = 1e-12
DEFAULT_FIXED_K = 3

# effective corrections that fail to decrease this many times in a row end the run
STAGNATION_WINDOW = 3

# truncated part of X is flagged when its Frobenius norm exceeds this fraction of delta
TRUNCATION_FLAG_RATIO = 0.1

# baseline_eig(method="auto") switches from Jacobi to LAPACK above this size
JACOBI_AUTO_LIMIT = 512

# fixed-k runs with a fixed iteration count have no target; any admissible delta works
FIXED_K_NOMINAL_DELTA = 1e-15

STOP_TARGET = "target"            # effective correction <= delta / 2
STOP_PREDICTED = "predicted"      # predicted post-step forward error <= delta
STOP_STAGNATION = "stagnation"
STOP_MAX_ITER = "max_iter"
STOP_ERROR = "error"
STOP_FIXED = "fixed_iterations"

MESSAGE_DEGENERATE_COLUMN = "column {j} of X has r_j = {r:.3e} >= 1 (zero or vanishing norm)"
MESSAGE_SLICE_CAP = "row split of A hit the {cap}-slice cap with a nonzero remainder"
MESSAGE_TRUNCATION = "discarded X^(2) has Frobenius norm {norm:.3e} > delta/10 = {limit:.3e}"
MESSAGE_INEXACT = "{count} slice product(s) may be inexact (significand width up to {width} bits)"
MESSAGE_CONVERGED = "converged after {iters} iteration(s) ({reason})"
MESSAGE_NOT_CONVERGED = "stopped without meeting delta after {iters} iteration(s) ({reason})"
