"""Structural golden checks for the three figure kinds."""

import csv
import math

import numpy as np
import pytest

from plotkit import (FigureJob, SchemaError, plot_precision_curves,
                     plot_rmse_curves, plot_trace_hist)
from plotkit.cli import main


def write_samples_csv(path, n=200, d=2, seed=0, warm_frac=0.5):
    rng = np.random.default_rng(seed)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_index", "t"] + [f"q_{i+1}" for i in range(d)]
                   + ["phase"])
        for i in range(1, n + 1):
            phase = "warmup" if i <= warm_frac * n else "sample"
            w.writerow([i, float(i)] + list(rng.standard_normal(d)) + [phase])
    return path


def write_rmse_csv(path, targets=("a", "b"), betas=(0.3, 1.0, 3.0)):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["target", "beta", "strategy", "rmse", "benchmark_rmse",
                    "replicas", "failures"])
        for t in targets:
            for b in betas:
                for s in ("continuous", "delta_half_pi", "delta_pi",
                          "events"):
                    w.writerow([t, b, s, 0.01 * (1 + b), 0.0316, 100, 0])
    return path


def write_precision_csv(path, tols=(1e-1, 1e-2, 1e-3),
                        horizons=(250.0, 1000.0), moments=("E[q1]", "E[q2]")):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tol", "T", "moment", "pair_rms", "exact_mc_rmse"])
        for tol in tols:
            for T in horizons:
                for m in moments:
                    w.writerow([tol, T, m, tol * 0.1, 0.05 * math.sqrt(250 / T)])
    return path


class TestTraceHist:
    def test_two_panel_layout_with_reference(self, tmp_path):
        files = [write_samples_csv(tmp_path / f"s_{k}.csv", seed=k)
                 for k in range(3)]
        fig = plot_trace_hist(files)
        assert len(fig.axes) == 2
        hist_ax, trace_ax = fig.axes
        assert len(hist_ax.patches) > 0  # histogram bars
        assert len(hist_ax.lines) == 1  # the N(0,1) overlay
        # 3 replica traces + 2 separators
        assert len(trace_ax.lines) == 3 + 2

    def test_single_replica_has_no_separators(self, tmp_path):
        f = write_samples_csv(tmp_path / "s.csv")
        fig = plot_trace_hist([f], reference=None)
        trace_ax = fig.axes[1]
        assert len(trace_ax.lines) == 1

    def test_empty_csv_rejected(self, tmp_path):
        f = tmp_path / "empty.csv"
        f.write_text("")
        with pytest.raises(SchemaError):
            plot_trace_hist([f])

    def test_warmup_only_file_rejected(self, tmp_path):
        f = write_samples_csv(tmp_path / "w.csv", warm_frac=1.0)
        with pytest.raises(SchemaError):
            plot_trace_hist([f])


class TestRmseCurves:
    def test_panel_per_target(self, tmp_path):
        f = write_rmse_csv(tmp_path / "rmse.csv", targets=("a", "b", "c", "d"))
        fig = plot_rmse_curves(f)
        assert len(fig.axes) == 4
        for ax in fig.axes:
            assert ax.get_xscale() == "log"
            # 4 strategy lines + 1 benchmark hline
            assert len(ax.lines) == 5

    def test_single_target_single_panel(self, tmp_path):
        f = write_rmse_csv(tmp_path / "rmse.csv", targets=("only",))
        fig = plot_rmse_curves(f)
        assert len(fig.axes) == 1

    def test_missing_benchmark_column_rejected(self, tmp_path):
        f = tmp_path / "bad.csv"
        with open(f, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["target", "beta", "strategy", "rmse", "replicas",
                        "failures"])
            w.writerow(["a", 1.0, "continuous", 0.01, 100, 0])
        with pytest.raises(SchemaError):
            plot_rmse_curves(f)


class TestPrecisionCurves:
    def test_loglog_panels_and_reference_lines(self, tmp_path):
        f = write_precision_csv(tmp_path / "p.csv")
        fig = plot_precision_curves(f)
        assert len(fig.axes) == 2  # one per moment
        for ax in fig.axes:
            assert ax.get_xscale() == "log"
            assert ax.get_yscale() == "log"
            # per horizon: one curve + one dashed reference
            assert len(ax.lines) == 2 * 2

    def test_schema_mismatch_rejected(self, tmp_path):
        f = tmp_path / "nope.csv"
        f.write_text("a,b\n1,2\n")
        with pytest.raises(SchemaError):
            plot_precision_curves(f)


class TestJobAndCli:
    def test_job_writes_image(self, tmp_path):
        f = write_rmse_csv(tmp_path / "rmse.csv")
        out = tmp_path / "fig" / "rmse.png"
        job = FigureJob("rmse-curves", (str(f),), str(out))
        assert job.run() == out
        assert out.stat().st_size > 0

    def test_job_unknown_kind(self, tmp_path):
        with pytest.raises(ValueError):
            FigureJob("nope", (), str(tmp_path / "x.png")).run()

    def test_cli_round_trip(self, tmp_path, capsys):
        s = write_samples_csv(tmp_path / "s.csv")
        out = tmp_path / "fig.png"
        assert main(["trace-hist", str(s), "--out", str(out)]) == 0
        assert out.exists()

    def test_cli_reports_schema_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("x\n")
        assert main(["rmse-curves", str(bad), "--out",
                     str(tmp_path / "y.png")]) == 2
        assert "error" in capsys.readouterr().err

    def test_inputs_never_mutated(self, tmp_path):
        f = write_precision_csv(tmp_path / "p.csv")
        before = f.read_bytes()
        FigureJob("precision-curves", (str(f),),
                  str(tmp_path / "p.png")).run()
        assert f.read_bytes() == before
