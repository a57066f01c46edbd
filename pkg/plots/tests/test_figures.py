import pathlib
import shutil

import numpy as np
import pytest

from entropic_rl_plots import (
    CsvValidationError,
    FigureSpec,
    plot_curves,
    plot_stabilization_histogram,
    plot_value_heatmap,
    read_csv_columns,
)
from entropic_rl_plots.cli import main

FIXTURES = pathlib.Path(__file__).parent / "fixtures"
AGG = str(FIXTURES / "curves_aggregate.csv")
SINGLE = str(FIXTURES / "curves_single.csv")
GRID = str(FIXTURES / "value_grid.csv")
TRAJ = str(FIXTURES / "trajectory.csv")
REPORT = str(FIXTURES / "stabilization_report.csv")


def test_curves_matches_golden_bytes(tmp_path):
    out = tmp_path / "curves.png"
    plot_curves(FigureSpec(inputs=[AGG, SINGLE], metric="eval_return_mean",
                           labels=["aggregate", "single"],
                           title="fixture curves", out=str(out)))
    golden = (FIXTURES / "golden_curves.png").read_bytes()
    assert out.read_bytes() == golden


def test_heatmap_matches_golden_bytes(tmp_path):
    out = tmp_path / "heatmap.png"
    plot_value_heatmap(GRID, TRAJ, str(out), title="fixture heatmap")
    golden = (FIXTURES / "golden_heatmap.png").read_bytes()
    assert out.read_bytes() == golden


def test_histogram_matches_golden_bytes(tmp_path):
    out = tmp_path / "histogram.png"
    plot_stabilization_histogram(REPORT, str(out), title="fixture histogram")
    golden = (FIXTURES / "golden_histogram.png").read_bytes()
    assert out.read_bytes() == golden


def test_rendering_does_not_mutate_inputs(tmp_path):
    copy = tmp_path / "agg.csv"
    shutil.copy(AGG, copy)
    plot_curves(FigureSpec(inputs=[str(copy)], metric="eval_return_mean",
                           out=str(tmp_path / "x.png")))
    assert copy.read_bytes() == pathlib.Path(AGG).read_bytes()


def test_single_run_band_is_zero_width():
    data = read_csv_columns(SINGLE, required=("step", "eval_return_mean"))
    assert "eval_return_mean_std" not in data  # band falls back to zero


def test_missing_column_names_the_column(tmp_path):
    with pytest.raises(CsvValidationError, match="no_such_metric"):
        plot_curves(FigureSpec(inputs=[AGG], metric="no_such_metric",
                               out=str(tmp_path / "x.png")))


def test_histogram_missing_column_named(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("m,clipped_exponent\n1.0,1.0\n")
    with pytest.raises(CsvValidationError, match="m_minus_z"):
        plot_stabilization_histogram(str(bad), str(tmp_path / "x.png"))


def test_empty_csv_rejected(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(CsvValidationError, match="empty"):
        plot_stabilization_histogram(str(empty), str(tmp_path / "x.png"))


def test_trajectory_out_of_bounds_rejected(tmp_path):
    bad = tmp_path / "traj.csv"
    bad.write_text("x,y\n0,0\n99,0\n")
    with pytest.raises(CsvValidationError, match="leaves"):
        plot_value_heatmap(GRID, str(bad), str(tmp_path / "x.png"))


def test_constant_grid_renders(tmp_path):
    grid = tmp_path / "flat.csv"
    np.savetxt(grid, np.zeros((4, 4)), delimiter=",")
    out = tmp_path / "flat.png"
    traj = tmp_path / "traj.csv"
    traj.write_text("x,y\n0,0\n1,1\n")
    plot_value_heatmap(str(grid), str(traj), str(out))
    assert out.exists()


def test_fixture_report_clipped_values_within_bounds():
    data = read_csv_columns(REPORT)
    assert np.all(np.abs(data["clipped_exponent"]) <= 5.0)


def test_labels_must_match_inputs(tmp_path):
    with pytest.raises(CsvValidationError, match="one-to-one"):
        FigureSpec(inputs=[AGG, SINGLE], metric="m", labels=["only-one"],
                   out=str(tmp_path / "x.png"))


def test_cli_round_trip(tmp_path, capsys):
    out = tmp_path / "cli.png"
    code = main(["curves", "--in", AGG, "--metric", "eval_return_mean",
                 "--label", "agg", "--out", str(out)])
    assert code == 0 and out.exists()
    code = main(["heatmap", "--grid", GRID, "--trajectory", TRAJ,
                 "--out", str(tmp_path / "h.png")])
    assert code == 0
    code = main(["histogram", "--in", REPORT,
                 "--out", str(tmp_path / "s.png")])
    assert code == 0


def test_cli_validation_error_exit_code(tmp_path, capsys):
    code = main(["curves", "--in", AGG, "--metric", "nope",
                 "--out", str(tmp_path / "x.png")])
    assert code == 2
    assert "validation error" in capsys.readouterr().err
