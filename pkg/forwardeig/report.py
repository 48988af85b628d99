"""Run reports (JSON) and figure/table output (CSV with a versioned header line)."""

from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from util import get_logger
from .refine import ConvergenceHistory
from .report_constant import *

logger = get_logger(__name__)


class ReferenceSummary(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    residual: float
    orthogonality: float
    margin: float
    sweeps: int
    initial_error: Optional[float] = None


class RunReport(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    version: int = REPORT_VERSION
    command: str
    source: Dict[str, Any]
    config: Dict[str, Any]
    n: int
    history: ConvergenceHistory
    final_eigenvalues: List[float] = Field(default_factory=list)
    reference: Optional[ReferenceSummary] = None
    timings: Optional[Dict[str, float]] = None


def _strip_timings(history):
    records = [r.model_copy(update=dict(elapsed=None)) for r in history.records]
    return history.model_copy(update=dict(records=records))


def build_report(command, source, cfg, history, approx, reference=None, timings=None):
    """RunReport for one refinement; per-step timings are kept only when ``timings`` is given."""
    if timings is None:
        history = _strip_timings(history)
    summary = None
    if reference is not None:
        summary = ReferenceSummary(
            residual=reference.residual,
            orthogonality=reference.orthogonality,
            margin=reference.margin,
            sweeps=reference.sweeps,
            initial_error=reference.initial_error,
        )
    return RunReport(
        command=command,
        source=dict(source),
        config=cfg.model_dump(),
        n=approx.n,
        history=history,
        final_eigenvalues=[float(v) for v in approx.lam],
        reference=summary,
        timings=timings,
    )


def write_report(report, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.model_dump_json(indent=2) + "\n")
    logger.info(f"Wrote report {path}")
    return path


def history_frame(history, delta):
    rows = [
        dict(
            iter=r.iteration,
            forward_error=r.forward_error,
            orth_backward=r.orth_backward,
            diag_backward=r.diag_backward,
            delta=delta,
            n_A=r.n_a,
            beta=r.beta,
            alpha=r.alpha,
            effective_correction=r.effective_correction,
            correction_fro=r.correction_fro,
            predicted_error=r.predicted_error,
            truncation_fro=r.truncation_fro,
        )
        for r in history.records
    ]
    return pd.DataFrame(rows, columns=REFINE_COLUMNS)


def write_table(df, path, name):
    """CSV preceded by the ``# forwardeig-csv v1 <name>`` line; a markdown copy goes to the log."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        f.write(CSV_HEADER.format(version=CSV_SCHEMA_VERSION, name=name))
        df.to_csv(f, index=False, lineterminator="\n")
    if len(df):
        logger.info(f"{name}\n{df.to_markdown(index=False)}")
    else:
        logger.info(f"{name}: empty table")
    return path


def read_table(path):
    """Inverse of write_table: (name, DataFrame)."""
    path = Path(path)
    with path.open() as f:
        header = f.readline().split()
        if len(header) != 4 or header[:2] != ["#", "forwardeig-csv"]:
            raise ValueError(f"{path}: missing forwardeig-csv header line")
        if header[2] != CSV_SCHEMA_VERSION:
            raise ValueError(f"{path}: schema {header[2]} is not {CSV_SCHEMA_VERSION}")
        return header[3], pd.read_csv(f)
