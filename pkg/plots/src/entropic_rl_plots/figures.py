"""Figure generation from experiment CSV files.

Consumes only the documented CSV schemas:

- aggregate learning curves: header ``step, <metric>_mean, <metric>_std``
  (single-run CSVs with plain ``<metric>`` columns also work; the band
  width is then zero);
- gridworld value grids: a headerless height x width float matrix,
  top row first;
- greedy trajectories: header ``x, y`` with one cell per row;
- stabilization reports: header containing ``m, m_minus_z,
  clipped_exponent`` with one mini-batch sample per row.

All output is PNG rendered off-screen; inputs are never modified and
reruns are byte-identical for the same matplotlib version.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# Fixed so reruns produce identical bytes.
SAVEFIG = dict(dpi=100, metadata={"Software": None})


class CsvValidationError(ValueError):
    """A CSV input is missing a required column or is malformed."""


@dataclass
class FigureSpec:
    """What to draw: input CSVs, the metric to plot, labels, and output."""

    inputs: list
    metric: str
    out: str
    labels: list = field(default_factory=list)
    title: str = ""
    xlabel: str = "step"
    ylabel: str = ""
    kind: str = "curves"

    def __post_init__(self):
        if self.kind not in ("curves", "heatmap", "histogram"):
            raise CsvValidationError(f"unknown plot kind {self.kind!r}")
        if not self.inputs:
            raise CsvValidationError("at least one input CSV is required")
        if self.labels and len(self.labels) != len(self.inputs):
            raise CsvValidationError("labels must match inputs one-to-one")


def read_csv_columns(path: str, required: tuple = ()) -> dict:
    """Read a headered CSV into {column: float array}, checking columns.

    Rows starting with ``#`` (abort trailers) are skipped.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise CsvValidationError(f"{path}: empty CSV")
    header = [h.strip() for h in rows[0]]
    missing = [c for c in required if c not in header]
    if missing:
        raise CsvValidationError(
            f"{path}: missing required column(s) {missing}; found {header}")
    data = {h: [] for h in header}
    for row in rows[1:]:
        for h, v in zip(header, row):
            data[h].append(float(v))
    return {h: np.asarray(v) for h, v in data.items()}


def _mean_std(data: dict, metric: str, path: str):
    """Metric mean/std columns; a plain single-run column gets a zero band."""
    if f"{metric}_mean" in data:
        mean = data[f"{metric}_mean"]
        std = data.get(f"{metric}_std", np.zeros_like(mean))
        return mean, std
    if metric in data:
        return data[metric], np.zeros_like(data[metric])
    raise CsvValidationError(
        f"{path}: missing required column(s) ['{metric}_mean' or "
        f"'{metric}']; found {sorted(data)}")


def plot_curves(spec: FigureSpec) -> str:
    """Learning curves: solid mean lines with +-1 std shaded bands."""
    fig, ax = plt.subplots(figsize=(6, 4))
    labels = spec.labels or [f"run {i}" for i in range(len(spec.inputs))]
    for path, label in zip(spec.inputs, labels):
        data = read_csv_columns(path, required=("step",))
        mean, std = _mean_std(data, spec.metric, path)
        ax.plot(data["step"], mean, label=label)
        ax.fill_between(data["step"], mean - std, mean + std, alpha=0.25)
    ax.set_xlabel(spec.xlabel)
    ax.set_ylabel(spec.ylabel or spec.metric)
    if spec.title:
        ax.set_title(spec.title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(spec.out, **SAVEFIG)
    plt.close(fig)
    return spec.out


def plot_value_heatmap(grid_csv: str, trajectory_csv: str, out: str,
                       title: str = "") -> str:
    """Log-domain value heatmap with a greedy trajectory overlaid.

    The grid CSV is a headerless matrix with the top row first; the
    trajectory CSV has ``x, y`` columns in grid coordinates with (0, 0)
    the bottom-left cell. The first and last trajectory cells are marked
    as start and goal.
    """
    try:
        grid = np.atleast_2d(np.loadtxt(grid_csv, delimiter=",", ndmin=2))
    except ValueError as exc:
        raise CsvValidationError(f"{grid_csv}: not a numeric matrix ({exc})")
    height, width = grid.shape
    traj = read_csv_columns(trajectory_csv, required=("x", "y"))
    xs, ys = traj["x"], traj["y"]
    if len(xs) == 0:
        raise CsvValidationError(f"{trajectory_csv}: empty trajectory")
    if (xs.min() < 0 or xs.max() > width - 1
            or ys.min() < 0 or ys.max() > height - 1):
        raise CsvValidationError(
            f"{trajectory_csv}: trajectory leaves the {width}x{height} grid")

    fig, ax = plt.subplots(figsize=(5, 5))
    # origin="lower" puts row 0 at the bottom, so flip the top-first matrix.
    im = ax.imshow(grid[::-1], origin="lower", cmap="viridis")
    ax.plot(xs, ys, color="white", linewidth=2, marker=".", markersize=6)
    ax.plot(xs[0], ys[0], marker="o", color="tab:red", markersize=10,
            label="start")
    ax.plot(xs[-1], ys[-1], marker="*", color="gold", markersize=14,
            label="goal")
    fig.colorbar(im, ax=ax, label="log Z")
    if title:
        ax.set_title(title)
    ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(out, **SAVEFIG)
    plt.close(fig)
    return out


HISTOGRAM_COLUMNS = ("m", "m_minus_z", "clipped_exponent")


def plot_stabilization_histogram(report_csv: str, out: str,
                                 title: str = "") -> str:
    """Overlaid histograms of the mini-batch stabilization quantities."""
    data = read_csv_columns(report_csv, required=HISTOGRAM_COLUMNS)
    fig, ax = plt.subplots(figsize=(6, 4))
    for column, label in zip(HISTOGRAM_COLUMNS,
                             ("raw m", "m - z", "clipped")):
        ax.hist(data[column], bins=40, alpha=0.5, label=label)
    ax.set_xlabel("exponent value")
    ax.set_ylabel("count")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out, **SAVEFIG)
    plt.close(fig)
    return out
