FLOAT_SWEEP_CAP = 30
DW_SWEEP_CAP = 60

# beyond this |tau|, 1 + tau**2 overflows; use t = 1/(2 tau)
TAU_LIMIT = 1e150

MESSAGE_NOT_SYMMETRIC = "matrix is not exactly symmetric"
MESSAGE_NO_CONVERGENCE = "Jacobi did not converge in {sweeps} sweeps (off-diagonal mass {off:.3e}, target {target:.3e})"
