"""Figure layer for muclab CSV outputs.

Reads the harness CSV files and emits publication-style figures: MSE vs N
on log-log axes with the 6.25/N reference line, histograms of min_i K_ii
with the 0.7 threshold marked, and Fisher-trace slack distributions. This
package only consumes CSV files; it computes no channel physics.
"""

from .cli import build_parser, main
from .figures import (
    CONCENTRATION_THRESHOLD,
    FIGURE_KINDS,
    MSE_REFERENCE_CONSTANT,
    FigureSpec,
    aggregate_mse,
    render,
)
from .io import NoDataError, SchemaMismatchError, load_rows

__version__ = "0.1.0"

__all__ = [
    "CONCENTRATION_THRESHOLD",
    "FIGURE_KINDS",
    "FigureSpec",
    "MSE_REFERENCE_CONSTANT",
    "NoDataError",
    "SchemaMismatchError",
    "aggregate_mse",
    "build_parser",
    "load_rows",
    "main",
    "render",
]
