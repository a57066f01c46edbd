"""Command-line figure generation: ``plots <kind> --in ... --out ...``."""
from __future__ import annotations

import argparse
import sys

from .figures import (
    CsvValidationError,
    FigureSpec,
    plot_curves,
    plot_stabilization_histogram,
    plot_value_heatmap,
)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plots", description="Render PNG figures from experiment CSVs")
    sub = parser.add_subparsers(dest="kind", required=True)

    p_curves = sub.add_parser("curves", help="learning curves with std bands")
    p_curves.add_argument("--in", dest="inputs", action="append",
                          required=True, help="aggregate or per-run CSV")
    p_curves.add_argument("--metric", required=True)
    p_curves.add_argument("--label", dest="labels", action="append")
    p_curves.add_argument("--title", default="")
    p_curves.add_argument("--out", required=True)

    p_heat = sub.add_parser("heatmap", help="value grid with trajectory")
    p_heat.add_argument("--grid", required=True, help="value grid CSV")
    p_heat.add_argument("--trajectory", required=True, help="x,y CSV")
    p_heat.add_argument("--title", default="")
    p_heat.add_argument("--out", required=True)

    p_hist = sub.add_parser("histogram", help="stabilization histograms")
    p_hist.add_argument("--in", dest="report", required=True)
    p_hist.add_argument("--title", default="")
    p_hist.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    try:
        if args.kind == "curves":
            spec = FigureSpec(inputs=args.inputs, metric=args.metric,
                              out=args.out, labels=args.labels or [],
                              title=args.title, kind="curves")
            path = plot_curves(spec)
        elif args.kind == "heatmap":
            path = plot_value_heatmap(args.grid, args.trajectory, args.out,
                                      title=args.title)
        else:
            path = plot_stabilization_histogram(args.report, args.out,
                                                title=args.title)
    except (CsvValidationError, FileNotFoundError, OSError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
