"""Experiment records and their deterministic CSV / JSON serialization.

One record per atomic measurement. CSV column order is fixed per kind,
floats carry 17 significant digits, and booleans serialize as "true"/"false",
so reruns with the same config are byte-identical. Wall time is reported
only in the JSON summary: it would break the byte-identity contract in CSV.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field

CSV_SCHEMAS: dict[str, list[str]] = {
    "mse_sweep": ["kind", "seed", "d_channel", "r", "k", "N", "trial", "sq_error"],
    "concentration": ["kind", "seed", "d_channel", "r", "trial", "min_kii", "mean_kii", "lambda_min_k"],
    "fisher_audit": ["kind", "seed", "d_channel", "r", "k", "trace_fisher", "bound", "slack", "satisfied"],
    "concat_audit": ["kind", "seed", "d_channel", "r", "k", "trace_fisher", "bound", "slack", "satisfied"],
}


@dataclass(frozen=True)
class ExperimentRecord:
    """One atomic measurement: identifying fields plus named metric values."""

    kind: str
    seed: int
    d_channel: int
    r: int
    k: int = 1
    N: int | None = None
    trial: int | None = None
    metrics: dict[str, float | bool] = field(default_factory=dict)
    wall_time: float = 0.0

    def row(self) -> list[str]:
        """Serialize to the CSV row declared for this record's kind."""
        if self.kind not in CSV_SCHEMAS:
            raise ValueError(f"kind {self.kind!r} has no CSV schema")
        cells = []
        for column in CSV_SCHEMAS[self.kind]:
            if hasattr(self, column):
                cells.append(format_cell(getattr(self, column)))
            else:
                if column not in self.metrics:
                    raise ValueError(f"record is missing metric {column!r}")
                cells.append(format_cell(self.metrics[column]))
        return cells


def format_cell(value: object) -> str:
    """Render one CSV cell: 17-significant-digit floats, true/false booleans."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    if value is None:
        return ""
    return str(value)


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def write_csv(path: str, kind: str, records: list[ExperimentRecord]) -> None:
    """Write records of one kind to CSV atomically (header always present)."""
    header = ",".join(CSV_SCHEMAS[kind])
    lines = [header]
    for record in records:
        if record.kind != kind:
            raise ValueError(f"record kind {record.kind!r} does not match {kind!r}")
        lines.append(",".join(record.row()))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_json_summary(path: str, summary: dict) -> None:
    """Write the run summary as pretty-printed JSON atomically."""
    _atomic_write(path, json.dumps(summary, indent=2, sort_keys=True) + "\n")
