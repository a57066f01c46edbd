"""Regenerate fixture CSVs and golden PNGs for the plots test suite."""
import csv
import pathlib

import numpy as np

from entropic_rl_plots import (
    FigureSpec,
    plot_curves,
    plot_stabilization_histogram,
    plot_value_heatmap,
)

FIXTURES = pathlib.Path(__file__).resolve().parents[1] / "tests" / "fixtures"


def write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(0)

    steps = np.arange(1000, 11000, 1000)
    mean = 200.0 / (1.0 + np.exp(-(steps - 5000) / 1500.0))
    std = 10.0 + 5.0 * rng.random(len(steps))
    write_rows(FIXTURES / "curves_aggregate.csv",
               ["step", "eval_return_mean_mean", "eval_return_mean_std"],
               [[int(s), repr(float(m)), repr(float(d))]
                for s, m, d in zip(steps, mean, std)])
    write_rows(FIXTURES / "curves_single.csv",
               ["step", "eval_return_mean"],
               [[int(s), repr(float(m))] for s, m in zip(steps, mean)])

    grid = np.round(rng.normal(-20.0, 5.0, size=(6, 6)), 3)
    np.savetxt(FIXTURES / "value_grid.csv", grid, delimiter=",", fmt="%.3f")
    traj = [(0, 1), (1, 1), (2, 1), (3, 1), (4, 1), (5, 1), (5, 0)]
    write_rows(FIXTURES / "trajectory.csv", ["x", "y"], traj)

    m = rng.normal(0.0, 40.0, size=500)
    z = np.max(m)
    write_rows(FIXTURES / "stabilization_report.csv",
               ["m", "m_minus_z", "clipped_exponent"],
               [[repr(float(a)), repr(float(a - z)),
                 repr(float(np.clip(a - z, -5.0, 5.0)))] for a in m])

    plot_curves(FigureSpec(
        inputs=[str(FIXTURES / "curves_aggregate.csv"),
                str(FIXTURES / "curves_single.csv")],
        metric="eval_return_mean", labels=["aggregate", "single"],
        title="fixture curves", out=str(FIXTURES / "golden_curves.png")))
    plot_value_heatmap(str(FIXTURES / "value_grid.csv"),
                       str(FIXTURES / "trajectory.csv"),
                       str(FIXTURES / "golden_heatmap.png"),
                       title="fixture heatmap")
    plot_stabilization_histogram(str(FIXTURES / "stabilization_report.csv"),
                                 str(FIXTURES / "golden_histogram.png"),
                                 title="fixture histogram")
    for name in ("golden_curves.png", "golden_heatmap.png",
                 "golden_histogram.png"):
        print(f"wrote {FIXTURES / name}")


if __name__ == "__main__":
    main()
