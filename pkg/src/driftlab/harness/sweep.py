"""Deterministic parallel execution of sweep cells.

Each cell owns an independent random stream whose index is a stable hash
of the cell coordinates, so results do not depend on scheduling order or
on the worker count.  Rows are kept in input-cell order and written with
fixed float formatting, which makes result CSVs byte-stable; wall-clock
timings live only in ``runs.csv`` and are excluded from that guarantee.
"""

from __future__ import annotations

import csv
import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from time import perf_counter

import numpy as np

from ..errors import DivergenceError, DriftlabError


def _canon(part) -> str:
    if isinstance(part, bool):
        return "true" if part else "false"
    if isinstance(part, (int, np.integer)):
        return str(int(part))
    if isinstance(part, (float, np.floating)):
        return "%.17g" % float(part)
    return str(part)


def cell_stream_index(*parts) -> int:
    """Stable 63-bit stream index derived from cell coordinates."""
    blob = "|".join(_canon(p) for p in parts)
    digest = hashlib.sha256(blob.encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


@dataclass
class CellOutcome:
    key: tuple
    rows: list = field(default_factory=list)
    status: str = "completed"
    message: str = ""
    wall_ms: float = 0.0
    extra: dict = field(default_factory=dict)


def run_cells(cells, worker, parallelism: int = 1) -> list:
    """Run ``worker(cell)`` for every cell, tolerating per-cell failures.

    A cell that raises DivergenceError is recorded as ``diverged``; any
    other library error is recorded as ``failed``.  Genuine bugs (foreign
    exceptions) propagate.  Results come back in input order regardless
    of the worker count.
    """
    cells = list(cells)
    results: list = [None] * len(cells)

    def call(i: int) -> None:
        start = perf_counter()
        try:
            out = worker(cells[i])
            if not isinstance(out, CellOutcome):
                raise TypeError("worker must return a CellOutcome")
        except DivergenceError as exc:
            out = CellOutcome(key=tuple(cells[i]), status="diverged", message=str(exc))
        except DriftlabError as exc:
            out = CellOutcome(key=tuple(cells[i]), status="failed", message=str(exc))
        out.wall_ms = 1e3 * (perf_counter() - start)
        results[i] = out

    workers = max(1, int(parallelism))
    if workers == 1 or len(cells) <= 1:
        for i in range(len(cells)):
            call(i)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(call, range(len(cells))))
    return results


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return str(value)


def write_csv(path, fieldnames, rows) -> None:
    """Write dict rows with stable formatting; empty rows still get a header."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(fieldnames))
        for row in rows:
            writer.writerow([format_value(row.get(name)) for name in fieldnames])


def write_run_log(path, outcomes, run_meta) -> None:
    """The per-cell status log; the one CSV allowed to carry wall time."""
    rows = []
    for out in outcomes:
        row = dict(run_meta)
        row["cell"] = "|".join(_canon(p) for p in out.key)
        row["status"] = out.status
        row["message"] = out.message
        row["wall_ms"] = out.wall_ms
        rows.append(row)
    names = list(run_meta.keys()) + ["cell", "status", "message", "wall_ms"]
    write_csv(path, names, rows)
