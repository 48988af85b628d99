CSV_SCHEMA_VERSION = "v1"
CSV_HEADER = "# forwardeig-csv {version} {name}\n"
REPORT_VERSION = 1

FIG1_COLUMNS = ["cond", "forward_error", "orth_backward", "diag_backward"]
FIG23_COLUMNS = [
    "cond", "delta", "iterations", "forward_error", "orth_backward", "diag_backward",
    "n_A", "beta", "stop_reason",
]
FIG45_COLUMNS = [
    "n", "method", "n_A", "delta", "iter", "forward_error", "orth_backward", "diag_backward",
    "effective_correction", "correction_fro", "beta",
]
REFINE_COLUMNS = [
    "iter", "forward_error", "orth_backward", "diag_backward", "delta", "n_A", "beta",
    "alpha", "effective_correction", "correction_fro", "predicted_error", "truncation_fro",
]
SPARSE_COLUMNS = ["name", "n", "delta", "initial_error"]  # followed by iter_1, iter_2, ...
