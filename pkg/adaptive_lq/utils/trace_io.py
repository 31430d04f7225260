# File: adaptive_lq/utils/trace_io.py
"""CSV and key/value emission of traces, summaries and reproduction reports."""
import csv
import logging
import math
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from ..config import settings
from ..exceptions import ArtifactIOError, TraceError
from ..schemas.results import IdealRunResult, RiccatiCheckRow, RunSummary, SpectrumReport, Table1Cell
from ..simulation import Trace

logger = logging.getLogger(__name__)

TRACE_FILENAME = "trace.csv"
SUMMARY_FILENAME = "summary.txt"
TABLE1_FILENAME = "table1.csv"
SPECTRA_FILENAME = "spectra.csv"
RICCATI_FILENAME = "riccati_check.csv"
IDEAL_SWEEP_FILENAME = "ideal_sweep.csv"


def format_value(v: object) -> str:
    """17 significant digits for floats; none/true/false for the rest."""
    if v is None:
        return "none"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def _open_for_write(path: Path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="", encoding="utf-8")
    except OSError as e:
        raise ArtifactIOError(path, e) from e


def _write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> Path:
    path = Path(path)
    f = _open_for_write(path)
    try:
        with f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_value(v) for v in row])
    except OSError as e:
        raise ArtifactIOError(path, e) from e
    return path


def write_trace_csv(trace: Trace, path: Path, decimation: Optional[int] = None) -> Path:
    """
    Write a trace as CSV: ``t`` then the channels in declaration order.

    Args:
        trace: Trace to write
        path: Destination file
        decimation: Keep every k-th sample starting with t=0; defaults to
            settings.TRACE_DECIMATION, 1 writes every tick

    Returns:
        The path written
    """
    every = settings.TRACE_DECIMATION if decimation is None else decimation
    if every < 1:
        raise TraceError(f"Decimation must be >= 1, got {every}")
    out = trace.decimate(every)
    rows = (np.concatenate([[out.t[i]], out.values[i]]) for i in range(len(out)))
    _write_rows(path, ["t"] + list(out.names), rows)
    logger.info(f"Wrote {len(out)} trace rows to {path}")
    return Path(path)


def read_trace_csv(path: Path) -> Trace:
    """Parse a CSV written by write_trace_csv back into a Trace."""
    path = Path(path)
    try:
        with open(path, "r", newline="", encoding="utf-8") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            body = [[float(v) for v in row] for row in reader if row]
    except OSError as e:
        raise ArtifactIOError(path, e) from e
    except ValueError as e:
        raise TraceError(f"Malformed trace file {path}: {e}") from e

    if not header or header[0] != "t":
        raise TraceError(f"Trace file {path} must start with a 't' column")
    names = header[1:]
    data = np.array(body, dtype=float).reshape(len(body), len(header))
    return Trace(t=data[:, 0].copy(), names=names, values=data[:, 1:].copy())


def summary_lines(summary: RunSummary) -> List[str]:
    return [f"{key}={format_value(value)}" for key, value in summary.model_dump().items()]


def write_summary(summary: RunSummary, path: Path) -> Path:
    """Flat key=value text file, one metric per line."""
    path = Path(path)
    f = _open_for_write(path)
    try:
        with f:
            f.write("\n".join(summary_lines(summary)) + "\n")
    except OSError as e:
        raise ArtifactIOError(path, e) from e
    logger.info(f"Wrote run summary to {path}")
    return path


def _write_models(path: Path, models: Sequence[BaseModel], model_cls: type) -> Path:
    fields = list(model_cls.model_fields)
    return _write_rows(path, fields, ([getattr(m, name) for name in fields] for m in models))


def write_table1_csv(cells: Sequence[Table1Cell], path: Path) -> Path:
    return _write_models(path, cells, Table1Cell)


def write_riccati_check_csv(rows: Sequence[RiccatiCheckRow], path: Path) -> Path:
    return _write_models(path, rows, RiccatiCheckRow)


def write_ideal_sweep_csv(results: Sequence[IdealRunResult], path: Path) -> Path:
    return _write_models(path, results, IdealRunResult)


def write_spectra_report(reports: Sequence[SpectrumReport], path: Path) -> Path:
    """One row per eigenvalue: label, vartheta, index, real, imag."""
    rows = []
    for report in reports:
        for i, (re, im) in enumerate(zip(report.real, report.imag)):
            rows.append([report.label, report.vartheta, i, re, im])
    return _write_rows(path, ["label", "vartheta", "index", "real", "imag"], rows)


def format_table1(cells: Sequence[Table1Cell]) -> str:
    """Plain-text grid of ||eps|| with tau_inf down and p across."""
    taus = sorted({c.tau_inf for c in cells})
    degrees = sorted({c.p for c in cells})
    lookup = {(c.tau_inf, c.p): c.eps_norm for c in cells}
    lines = ["tau_inf " + " ".join(f"{'p=' + str(p):>11}" for p in degrees)]
    for tau in taus:
        values = [lookup.get((tau, p), math.nan) for p in degrees]
        lines.append(f"{tau:<7g} " + " ".join(f"{v:>11.4g}" for v in values))
    return "\n".join(lines)
