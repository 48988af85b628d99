"""Command-line front end.

    forwardeig refine  --gen n=100,cond=1e10,seed=1 --delta 1e-6 --oracle on
    forwardeig figure  --which fig23
    forwardeig verify  --suite all
    forwardeig table-sparse --dir matrices/ --delta 1e-6 --delta 1e-10
    forwardeig gen     --gen n=64,cond=1e8 --out A.mtx

Exit codes: 0 success, 1 usage or input error, 2 numerical non-convergence
(or a failing verify suite).
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np
import pandas as pd

from settings import Settings
from util import get_logger
from .apis.parse_matrix_market import MatrixMarketParseError, write_matrix_market
from .cli_constant import *
from .fpcore import NonFiniteError, check_environment
from .jacobi import NotSymmetricError
from .matgen import (
    FixtureFormatError,
    GeneratorSpecError,
    generate,
    load_fixture,
    load_matrix_market,
    make_spec,
    randsvd_sym,
    save_fixture,
)
from .oracle import (
    MatchingAmbiguityError,
    OracleSizeError,
    backward_errors,
    forward_error,
    reference_eig,
)
from .oracle_constant import REFERENCE_SIZE_CAP
from .ozaki import DimensionMismatchError, SplitParameterError
from .refine import (
    InvalidConfigError,
    baseline_eig,
    make_config,
    refine_fixed_k,
    refine_to_delta,
)
from .report import build_report, history_frame, write_report, write_table
from .report_constant import FIG1_COLUMNS, FIG23_COLUMNS, FIG45_COLUMNS, SPARSE_COLUMNS
from .verify import run_suites

logger = get_logger(__name__)

INPUT_ERRORS = (
    FileNotFoundError,
    IsADirectoryError,
    MatrixMarketParseError,
    FixtureFormatError,
    GeneratorSpecError,
    InvalidConfigError,
    NotSymmetricError,
    NonFiniteError,
    OracleSizeError,
    DimensionMismatchError,
    SplitParameterError,
)


class UsageError(Exception): pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# ---------------------------------------------------------------------------
# input helpers
# ---------------------------------------------------------------------------

def parse_gen(text, seed=None):
    """'n=100,cond=1e10,seed=1' -> GenSpec; values are coerced by the model."""
    fields = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        key, sep, value = part.partition("=")
        if not sep or not key.strip():
            raise GeneratorSpecError(MESSAGE_GEN_SYNTAX.format(text=text))
        fields[key.strip()] = value.strip()
    fields.setdefault("seed", Settings.seed(seed))
    return make_spec(**fields)


def load_input(path):
    path = Path(path)
    if path.suffix in FIXTURE_SUFFIXES:
        return load_fixture(path)
    return load_matrix_market(path)


def _source(args):
    if bool(args.input) == bool(args.gen):
        raise UsageError(MESSAGE_SOURCE)
    if args.input:
        return load_input(args.input), dict(input=str(args.input))
    spec = parse_gen(args.gen, args.seed)
    return generate(spec), dict(gen=spec.model_dump())


def _config(args, delta):
    mode = args.mode.replace("-", "_")
    return make_config(
        delta=delta,
        mode=mode,
        k=args.k,
        max_iter=args.max_iter,
        n_a=args.na,
        threads=args.threads,
    )


def _reference(A, X0, warm_start=True):
    ref = reference_eig(A, warm_start=warm_start)
    ref.initial_error = forward_error(ref.X, ref.lam, X0)
    return ref


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_refine(args):
    start = time.perf_counter()
    A, source = _source(args)
    cfg = _config(args, args.delta)
    X0 = baseline_eig(A)
    ref = _reference(A, X0) if args.oracle == "on" else None
    if cfg.mode == "fixed_k" and args.iters is not None:
        approx, history = refine_fixed_k(A, X0, cfg.k, args.iters, oracle=ref, threads=cfg.threads)
    else:
        approx, history = refine_to_delta(A, X0, cfg, oracle=ref)
    timings = dict(total=time.perf_counter() - start) if args.timings else None
    report = build_report("refine", source, cfg, history, approx, reference=ref, timings=timings)
    if args.out:
        write_report(report, args.out)
    else:
        print(report.model_dump_json(indent=2))
    if args.csv:
        write_table(history_frame(report.history, cfg.delta), args.csv, "refine")
    if ref is not None and history.records:
        logger.info(f"initial forward error {ref.initial_error:.3e}, final {history.records[-1].forward_error:.3e}")
    return EXIT_OK if history.converged else EXIT_NOT_CONVERGED


def figure1(n, conds, seed):
    """Baseline forward and backward errors across the condition-number grid."""
    rows = []
    for cond in conds:
        A = randsvd_sym(make_spec(n=n, cond=cond, seed=seed))
        X0 = baseline_eig(A)
        ref = reference_eig(A)
        orth, diag = backward_errors(A, X0)
        rows.append(dict(cond=cond, forward_error=ref.forward_error(X0), orth_backward=orth, diag_backward=diag))
    return pd.DataFrame(rows, columns=FIG1_COLUMNS)


def figure23(n, conds, deltas, seed, mode="dense", threads=1):
    """Final forward error of refine_to_delta for each (cond, delta) cell."""
    rows = []
    for cond in conds:
        A = randsvd_sym(make_spec(n=n, cond=cond, seed=seed))
        X0 = baseline_eig(A)
        ref = _reference(A, X0)
        for delta in deltas:
            cfg = make_config(delta=delta, mode=mode, threads=threads)
            approx, history = refine_to_delta(A, X0, cfg, oracle=ref)
            last = history.records[-1] if history.records else None
            orth, diag = backward_errors(A, approx)
            rows.append(dict(
                cond=cond,
                delta=delta,
                iterations=len(history.records),
                forward_error=ref.forward_error(approx),
                orth_backward=orth,
                diag_backward=diag,
                n_A=last.n_a if last else None,
                beta=last.beta if last else None,
                stop_reason=history.stop_reason,
            ))
    return pd.DataFrame(rows, columns=FIG23_COLUMNS)


def _history_rows(n, method, n_a, delta, history):
    return [
        dict(
            n=n,
            method=method,
            n_A=n_a,
            delta=delta,
            iter=r.iteration,
            forward_error=r.forward_error,
            orth_backward=r.orth_backward,
            diag_backward=r.diag_backward,
            effective_correction=r.effective_correction,
            correction_fro=r.correction_fro,
            beta=r.beta,
        )
        for r in history.records
    ]


def figure45(sizes, deltas, n_as, iters, seed, oracle=True, threads=1, cond=FIG45_COND):
    """Convergence histories: the proposed method per fixed n_A and the fixed-k baseline."""
    rows = []
    for n in sizes:
        A = randsvd_sym(make_spec(n=n, cond=cond, seed=seed))
        X0 = baseline_eig(A)
        ref = None
        if oracle:
            ref = _reference(A, X0)
            ref.backward = False
        for delta in deltas:
            for n_a in n_as:
                cfg = make_config(delta=delta, mode="dense", n_a=n_a, max_iter=iters, threads=threads)
                _, history = refine_to_delta(A, X0, cfg, oracle=ref)
                rows.extend(_history_rows(n, "proposed", n_a, delta, history))
        for k in (2, 3, 4):
            _, history = refine_fixed_k(A, X0, k, iters, oracle=ref, threads=threads)
            rows.extend(_history_rows(n, "fixed_k", k, None, history))
    return pd.DataFrame(rows, columns=FIG45_COLUMNS)


def cmd_figure(args):
    seed = Settings.seed(args.seed)
    out_dir = Path(args.out_dir or Settings.output_dir)
    if args.which == "fig1":
        df = figure1(args.n or FIG1_N, args.cond or FIG1_CONDS, seed)
    elif args.which == "fig23":
        df = figure23(args.n or FIG23_N, args.cond or FIG23_CONDS, args.delta or FIG23_DELTAS, seed, threads=args.threads)
    else:
        sizes = [args.n] if args.n else (FIG45_LARGE_SIZES if args.large else FIG45_SIZES)
        oracle = not args.large
        if oracle:
            for n in sizes:
                if n > REFERENCE_SIZE_CAP:
                    raise OracleSizeError(f"fig45 with the oracle is capped at n <= {REFERENCE_SIZE_CAP}; use --large")
        df = figure45(
            sizes,
            args.delta or FIG45_DELTAS,
            FIG45_N_A,
            args.iters or FIG45_ITERS,
            seed,
            oracle=oracle,
            threads=args.threads,
            cond=(args.cond or [FIG45_COND])[0],
        )
    write_table(df, out_dir / f"{args.which}.csv", args.which)
    return EXIT_OK


def cmd_verify(args):
    results = run_suites(args.suite or ["all"], seed=Settings.seed(args.seed))
    for r in results:
        print(f"{r.name}: {r.passed} passed, {r.failed} failed")
    return EXIT_OK if all(r.ok for r in results) else EXIT_NOT_CONVERGED


def table_sparse(directory, deltas, n_a=SPARSE_N_A, max_iter=SPARSE_MAX_ITER, mode="sparse", threads=1):
    """Per file and delta: n, initial forward error and the forward error after each iteration."""
    rows = []
    for path in sorted(Path(directory).glob("*.mtx")):
        try:
            A = load_matrix_market(path)
        except (MatrixMarketParseError, OSError, UnicodeDecodeError) as ex:
            logger.warning(MESSAGE_SKIP_UNREADABLE.format(name=path.name, error=ex))
            continue
        n = A.shape[0]
        if n > REFERENCE_SIZE_CAP:
            logger.warning(MESSAGE_SKIP_LARGE.format(name=path.name, n=n, cap=REFERENCE_SIZE_CAP))
            continue
        try:
            X0 = baseline_eig(A)
            ref = _reference(A, X0)
        except (NotSymmetricError, NonFiniteError, ArithmeticError) as ex:
            logger.warning(MESSAGE_SKIP_UNREADABLE.format(name=path.name, error=ex))
            continue
        ref.backward = False
        for delta in deltas:
            cfg = make_config(delta=delta, mode=mode, n_a=n_a, max_iter=max_iter, threads=threads)
            _, history = refine_to_delta(A, X0, cfg, oracle=ref)
            row = dict(name=path.stem, n=n, delta=delta, initial_error=ref.initial_error)
            for r in history.records:
                row[f"iter_{r.iteration}"] = r.forward_error
            rows.append(row)
    iter_columns = sorted({c for row in rows for c in row if c.startswith("iter_")}, key=lambda c: int(c[5:]))
    return pd.DataFrame(rows, columns=SPARSE_COLUMNS + iter_columns)


def cmd_table_sparse(args):
    df = table_sparse(
        args.dir,
        args.delta or SPARSE_DELTAS,
        n_a=args.na,
        max_iter=args.max_iter,
        mode=args.mode.replace("-", "_"),
        threads=args.threads,
    )
    out = Path(args.out or Path(Settings.output_dir) / "table_sparse.csv")
    write_table(df, out, "table-sparse")
    return EXIT_OK


def cmd_gen(args):
    spec = parse_gen(args.gen, args.seed)
    A = generate(spec)
    out = Path(args.out)
    if out.suffix in FIXTURE_SUFFIXES:
        written = save_fixture(out, A)
    else:
        written = write_matrix_market(out, A)
    print(written)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--seed", type=int, default=None, help="Seed; overrides FORWARD_EIG_SEED.")
    p.add_argument("--threads", type=int, default=Settings.threads, help="Threads for slice products.")


def build_parser():
    parser = _Parser(prog="forwardeig", description="Forward-error-targeted eigenvector refinement.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("refine", help="Refine the eigenvectors of one matrix to a target forward error.")
    p.add_argument("--input", type=Path, help="MatrixMarket file or binary fixture.")
    p.add_argument("--gen", help="Generated matrix, e.g. n=100,cond=1e10,seed=1.")
    p.add_argument("--delta", type=float, required=True, help="Target forward error.")
    p.add_argument("--mode", choices=MODE_CHOICES, default="dense")
    p.add_argument("--k", type=int, default=3, help="Slices per operand in fixed-k mode.")
    p.add_argument("--iters", type=int, default=None, help="Fixed-k only: run exactly this many iterations.")
    p.add_argument("--na", type=int, default=None, help="Fixed number of A terms (slices + remainder).")
    p.add_argument("--max-iter", type=int, default=10)
    p.add_argument("--oracle", choices=ORACLE_CHOICES, default="off")
    p.add_argument("--out", type=Path, help="JSON report path (stdout when omitted).")
    p.add_argument("--csv", type=Path, help="Per-iteration CSV path.")
    p.add_argument("--timings", action="store_true", help="Include wall-clock timings in the report.")
    _add_common(p)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("figure", help="Reproduce a figure's data as CSV.")
    p.add_argument("--which", choices=FIGURES, required=True)
    p.add_argument("--n", type=int, default=None, help="Matrix size (fig45: a single size).")
    p.add_argument("--cond", type=float, action="append", help="Condition number; repeat for a grid.")
    p.add_argument("--delta", type=float, action="append", help="Target; repeat for a grid.")
    p.add_argument("--iters", type=int, default=None, help="fig45: iterations per history.")
    p.add_argument("--large", action="store_true", help="fig45 at n in {1024, 4096, 8192} without the oracle.")
    p.add_argument("--out-dir", type=Path, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("verify", help="Run the exactness suites.")
    p.add_argument("--suite", choices=SUITE_CHOICES, action="append")
    _add_common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("table-sparse", help="Forward-error table over a directory of .mtx files.")
    p.add_argument("--dir", type=Path, required=True)
    p.add_argument("--delta", type=float, action="append", help="Target; repeat for the multi-delta layout.")
    p.add_argument("--na", type=int, default=SPARSE_N_A)
    p.add_argument("--mode", choices=MODE_CHOICES[:3], default="sparse")
    p.add_argument("--max-iter", type=int, default=SPARSE_MAX_ITER)
    p.add_argument("--out", type=Path, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_table_sparse)

    p = sub.add_parser("gen", help="Write a generated matrix as .mtx or binary fixture.")
    p.add_argument("--gen", required=True, help="e.g. n=64,cond=1e8,seed=3,kind=banded,bandwidth=2")
    p.add_argument("--out", type=Path, required=True)
    _add_common(p)
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as ex:
        print(f"forwardeig: error: {ex}", file=sys.stderr)
        return EXIT_USAGE
    env = check_environment()
    if env != "ok":
        logger.error(MESSAGE_ENVIRONMENT.format(reason=env))
        return EXIT_USAGE
    np.seterr(all="ignore")
    try:
        return args.func(args)
    except UsageError as ex:
        print(f"forwardeig: error: {ex}", file=sys.stderr)
        return EXIT_USAGE
    except INPUT_ERRORS as ex:
        logger.error(f"{type(ex).__name__}: {ex}")
        return EXIT_USAGE
    except (ArithmeticError, MatchingAmbiguityError) as ex:
        logger.error(f"{type(ex).__name__}: {ex}")
        return EXIT_NOT_CONVERGED
