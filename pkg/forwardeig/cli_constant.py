EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NOT_CONVERGED = 2

ORACLE_CHOICES = ("on", "off")
MODE_CHOICES = ("theoretical", "dense", "sparse", "fixed-k")
FIGURES = ("fig1", "fig23", "fig45")
SUITE_CHOICES = ("eft", "split", "gemm", "all")
FIXTURE_SUFFIXES = (".bin", ".fix")

FIG1_N = 100
FIG1_CONDS = tuple(10.0 ** p for p in range(2, 15, 2))

FIG23_N = 100
FIG23_CONDS = (1e2, 1e6, 1e10)
FIG23_DELTAS = (1e-6, 1e-10)

FIG45_SIZES = (256, 512, 1024)
FIG45_LARGE_SIZES = (1024, 4096, 8192)
FIG45_COND = 1e10
FIG45_DELTAS = (1e-8, 1e-10, 1e-12)
FIG45_N_A = (2, 3, 4, 5, 6)
FIG45_ITERS = 4

SPARSE_DELTAS = (1e-6,)
SPARSE_N_A = 2
SPARSE_MAX_ITER = 3

MESSAGE_ENVIRONMENT = "unsupported floating-point environment: {reason}"
MESSAGE_GEN_SYNTAX = "--gen expects key=value pairs separated by commas, got {text!r}"
MESSAGE_SOURCE = "exactly one of --input and --gen is required"
MESSAGE_SKIP_LARGE = "skipping {name}: n = {n} exceeds the reference cap {cap}"
MESSAGE_SKIP_UNREADABLE = "skipping {name}: {error}"
