"""Figure construction from harness CSV rows.

All aggregation (mean and standard error per shot count) happens here so the
CSV rows stay lossless. Figures are built on explicit Figure objects rather
than pyplot global state, which keeps rendering deterministic and headless.
"""

from dataclasses import dataclass

import numpy as np
from matplotlib.figure import Figure

from .io import column, load_for_kind

FIGURE_KINDS = ("mse_loglog", "concentration_hist", "slack_hist")
MSE_REFERENCE_CONSTANT = 6.25
CONCENTRATION_THRESHOLD = 0.7


@dataclass(frozen=True)
class FigureSpec:
    """One figure request: input CSV, figure kind, and output image path."""

    input_csv: str
    kind: str
    output: str
    title: str | None = None
    xlabel: str | None = None
    ylabel: str | None = None

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"kind: must be one of {FIGURE_KINDS}, got {self.kind!r}")


def aggregate_mse(rows):
    """Per-N mean and standard error of sq_error.

    Parameters
    ----------
    rows : list of dict
        Parsed mse_sweep rows carrying ``N`` and ``sq_error`` columns.

    Returns
    -------
    tuple of numpy.ndarray
        ``(n_values, means, stderrs)`` sorted by increasing N.
    """
    shots = column(rows, "N")
    errors = column(rows, "sq_error")
    n_values = np.unique(shots)
    means = np.empty(n_values.size)
    stderrs = np.empty(n_values.size)
    for idx, n in enumerate(n_values):
        cell = errors[shots == n]
        means[idx] = cell.mean()
        stderrs[idx] = cell.std(ddof=1) / np.sqrt(cell.size) if cell.size > 1 else 0.0
    return n_values, means, stderrs


def _mse_loglog(ax, rows):
    n_values, means, stderrs = aggregate_mse(rows)
    ax.errorbar(n_values, means, yerr=stderrs, fmt="none", ecolor="tab:blue", capsize=3)
    ax.plot(n_values, means, "o-", color="tab:blue", label="mean MSE")
    grid = np.geomspace(n_values.min(), n_values.max(), 50)
    ax.plot(grid, MSE_REFERENCE_CONSTANT / grid, "k--", label="reference 6.25/N")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("shots N")
    ax.set_ylabel("mean squared error")
    ax.legend()


def _concentration_hist(ax, rows):
    values = column(rows, "min_kii")
    ax.hist(values, bins="auto", color="tab:blue", alpha=0.8)
    ax.axvline(
        CONCENTRATION_THRESHOLD, color="tab:red", linestyle="--", label="0.7 threshold"
    )
    ax.set_xlabel("min_i K_ii")
    ax.set_ylabel("trials")
    ax.legend()


def _slack_hist(ax, rows):
    values = column(rows, "slack")
    ax.hist(values, bins="auto", color="tab:green", alpha=0.8)
    ax.axvline(0.0, color="tab:red", linestyle="--", label="slack = 0")
    ax.set_xlabel("slack = bound - Tr I(u)")
    ax.set_ylabel("protocols")
    ax.legend()


_RENDERERS = {
    "mse_loglog": _mse_loglog,
    "concentration_hist": _concentration_hist,
    "slack_hist": _slack_hist,
}


def render(spec):
    """Render one figure from a CSV file and save it to spec.output.

    Parameters
    ----------
    spec : FigureSpec
        Input CSV path, figure kind, and output image path.

    Returns
    -------
    matplotlib.figure.Figure
        The saved figure, for inspection by callers.

    Raises
    ------
    SchemaMismatchError
        If the CSV lacks a column the kind requires.
    NoDataError
        If the CSV has no data rows.
    """
    rows = load_for_kind(spec.input_csv, spec.kind)
    fig = Figure(figsize=(6.4, 4.8), dpi=100)
    ax = fig.add_subplot()
    _RENDERERS[spec.kind](ax, rows)
    if spec.title:
        ax.set_title(spec.title)
    if spec.xlabel:
        ax.set_xlabel(spec.xlabel)
    if spec.ylabel:
        ax.set_ylabel(spec.ylabel)
    save_kwargs = {}
    if spec.output.lower().endswith(".png"):
        # A fixed Software chunk keeps PNG bytes stable across library builds.
        save_kwargs["metadata"] = {"Software": "muclab-plot"}
    fig.savefig(spec.output, **save_kwargs)
    return fig
