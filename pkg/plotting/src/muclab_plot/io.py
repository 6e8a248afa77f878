"""CSV loading and schema checks for the figure kinds."""

import csv

import numpy as np

# Columns each figure kind needs from its input CSV.
REQUIRED_COLUMNS = {
    "mse_loglog": ("N", "sq_error"),
    "concentration_hist": ("min_kii",),
    "slack_hist": ("slack",),
}


class SchemaMismatchError(ValueError):
    """The input CSV lacks a column the figure kind requires."""


class NoDataError(ValueError):
    """The input CSV parses but contains no data rows."""


def load_rows(path):
    """Read a CSV file into (header, list-of-dict rows) without mutating it.

    Parameters
    ----------
    path : str
        CSV file with a mandatory header row.

    Returns
    -------
    tuple
        ``(header, rows)`` where header is a list of column names and rows
        a list of dicts keyed by column.
    """
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        header = list(reader.fieldnames or [])
        rows = list(reader)
    return header, rows


def check_schema(header, kind, path):
    """Raise SchemaMismatchError naming the first missing required column."""
    if kind not in REQUIRED_COLUMNS:
        raise ValueError(f"unknown figure kind {kind!r}")
    missing = [name for name in REQUIRED_COLUMNS[kind] if name not in header]
    if missing:
        raise SchemaMismatchError(
            f"{path}: missing column {missing[0]!r} required by figure kind {kind!r}"
        )


def load_for_kind(path, kind):
    """Load a CSV and verify it carries the columns the figure kind needs.

    Raises
    ------
    SchemaMismatchError
        If a required column is absent.
    NoDataError
        If the file holds a header but no data rows.
    """
    header, rows = load_rows(path)
    check_schema(header, kind, path)
    if not rows:
        raise NoDataError(f"{path}: no data rows")
    return rows


def column(rows, name, cast=float):
    """Extract one column from dict rows as a numpy array."""
    return np.array([cast(row[name]) for row in rows])
