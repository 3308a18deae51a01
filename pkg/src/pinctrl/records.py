"""Serialization of trajectory records and run summaries."""

from __future__ import annotations

import csv
import json
import os
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid

from .simulate import TrajectoryRecord

THRESHOLD_FRACTION = 0.05


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def timeseries_columns(n: int, p: int) -> list[str]:
    cols = ["t"]
    cols += [f"x[{i + 1}][{k + 1}]" for i in range(n) for k in range(p)]
    cols += [f"xr[{k + 1}]" for k in range(p)]
    cols += [f"u[{i + 1}][{k + 1}]" for i in range(n) for k in range(p)]
    cols += [f"enorm[{i + 1}]" for i in range(n)]
    cols += ["V", "v1", "v2", "v3"]
    return cols


def write_timeseries(record: TrajectoryRecord, destination) -> Path:
    """Write the record as comma-delimited text with 17 significant digits."""
    T, n, p = record.states.shape
    table = np.column_stack([
        record.times,
        record.states.reshape(T, n * p),
        record.reference,
        record.inputs.reshape(T, n * p),
        record.error_norms,
        record.V, record.v1, record.v2, record.v3,
    ])
    lines = [",".join(timeseries_columns(n, p))]
    lines += [",".join(f"{v:.17g}" for v in row) for row in table]
    dest = Path(destination)
    _atomic_write(dest, "\n".join(lines) + "\n")
    return dest


def read_timeseries(source) -> dict[str, np.ndarray]:
    """Read a file written by :func:`write_timeseries` into ``{column: values}``."""
    with open(source, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in row] for row in body]).reshape(len(body), len(header))
    return {name: data[:, j] for j, name in enumerate(header)}


@dataclass
class RunSummary:
    scenario: str
    seed: int
    gain: float
    certificate: dict | None
    initial_error_norm: float
    final_error_norm: float
    time_to_threshold: float | None
    control_energy: float
    bound_violations: int | None
    samples: int

    def to_dict(self) -> dict:
        return asdict(self)


def summarize(record: TrajectoryRecord, certificate=None, bound_report=None,
              scenario: str = "", seed: int = 0) -> RunSummary:
    err = record.total_error_norm
    e0 = float(err[0])
    hit = np.flatnonzero(err <= THRESHOLD_FRACTION * e0)
    u2 = np.sum(record.inputs ** 2, axis=(1, 2))
    energy = float(trapezoid(u2, record.times)) if len(record) > 1 else 0.0
    return RunSummary(
        scenario=scenario or record.meta.get("scenario", ""),
        seed=int(record.meta.get("seed", seed)),
        gain=float(record.meta.get("gain", float("nan"))),
        certificate=None if certificate is None else certificate.to_dict(),
        initial_error_norm=e0,
        final_error_norm=float(err[-1]),
        time_to_threshold=float(record.times[hit[0]]) if len(hit) else None,
        control_energy=energy,
        bound_violations=None if bound_report is None else bound_report.violation_count,
        samples=len(record),
    )


def write_summary(summary: RunSummary, destination) -> Path:
    dest = Path(destination)
    _atomic_write(dest, json.dumps(summary.to_dict(), indent=2, default=_jsonable) + "\n")
    return dest


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


SWEEP_COLUMNS = ["scenario", "gain", "lambda_max", "certified", "initial_error_norm",
                 "final_error_norm", "time_to_threshold", "control_energy", "bound_violations"]


def sweep_row(summary: RunSummary) -> list:
    cert = summary.certificate or {}
    return [summary.scenario, repr(summary.gain), repr(cert.get("lambda_max")), cert.get("certified"),
            repr(summary.initial_error_norm), repr(summary.final_error_norm),
            "" if summary.time_to_threshold is None else repr(summary.time_to_threshold),
            repr(summary.control_energy), summary.bound_violations]


def append_sweep_row(path, row: list) -> None:
    """Append one row, writing the header first if the file is new."""
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(SWEEP_COLUMNS)
        w.writerow(row)
        fh.flush()
        os.fsync(fh.fileno())
