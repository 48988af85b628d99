REFERENCE_SIZE_CAP = 2048
RATIONAL_SIZE_CAP = 128

# accepted reference: residual / ||A|| and orthogonality <= RESIDUAL_FACTOR * n * u**2
RESIDUAL_FACTOR = 1e3

MESSAGE_REFERENCE_CAP = "reference eigensolver is capped at n <= {cap}, got n = {n}"
MESSAGE_RATIONAL_CAP = "exact products are capped at dimension <= {cap}, got {shape}"
MESSAGE_AMBIGUOUS = (
    "eigenvalue {i} of the approximation ({approx!r}) is more than half the minimum gap "
    "({half_gap:.3e}) away from the reference ({ref!r})"
)
MESSAGE_REFERENCE_INACCURATE = (
    "reference residual {residual:.3e} or orthogonality {orth:.3e} exceeds {limit:.3e} (relative to the norm of A)"
)
