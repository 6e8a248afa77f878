"""Command-line entry point: ``muclab-plot <kind> --in file.csv --out fig.png``."""

import argparse
import sys

from .figures import FIGURE_KINDS, FigureSpec, render
from .io import NoDataError, SchemaMismatchError


def build_parser():
    parser = argparse.ArgumentParser(
        prog="muclab-plot",
        description="Render figures from muclab CSV outputs.",
    )
    parser.add_argument("kind", choices=FIGURE_KINDS, help="figure kind")
    parser.add_argument("--in", dest="input_csv", required=True, help="input CSV file")
    parser.add_argument("--out", dest="output", required=True, help="output image file")
    parser.add_argument("--title", help="figure title override")
    parser.add_argument("--xlabel", help="x-axis label override")
    parser.add_argument("--ylabel", help="y-axis label override")
    return parser


def main(argv=None):
    """Parse arguments, render one figure, and return a process exit code."""
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        input_csv=args.input_csv,
        kind=args.kind,
        output=args.output,
        title=args.title,
        xlabel=args.xlabel,
        ylabel=args.ylabel,
    )
    try:
        render(spec)
    except (SchemaMismatchError, NoDataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
