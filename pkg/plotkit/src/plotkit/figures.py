"""Figure builders: trace/histogram panels, RMSE curves, precision curves.

Each builder takes already-parsed rows and returns a matplotlib Figure;
nothing here mutates the inputs, and the layout depends only on them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import io  # noqa: E402

STRATEGY_MARKERS = {
    "continuous": ("o", "black"),
    "delta_half_pi": ("x", "tab:red"),
    "delta_pi": ("s", "tab:blue"),
    "events": ("^", "tab:green"),
}


def _std_normal_pdf(x):
    return np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)


def plot_trace_hist(sample_files, component: int = 0,
                    reference: str | None = "norm",
                    post_warmup_only: bool = True):
    """Density-scaled histogram plus concatenated trace with replica
    separators; optionally overlays the standard normal reference."""
    if not sample_files:
        raise io.SchemaError("no samples files given")
    chunks = []
    for path in sample_files:
        _, q, phase = io.read_samples(path)
        vals = q[:, component]
        if post_warmup_only:
            vals = vals[phase == "sample"]
        if vals.size == 0:
            raise io.SchemaError(f"{path}: no post-warmup samples")
        chunks.append(vals)

    fig, (ax_h, ax_t) = plt.subplots(1, 2, figsize=(10, 4))
    pooled = np.concatenate(chunks)
    ax_h.hist(pooled, bins=60, density=True, color="0.7")
    if reference == "norm":
        grid = np.linspace(pooled.min(), pooled.max(), 400)
        ax_h.plot(grid, _std_normal_pdf(grid), color="red", lw=1.5,
                  label="N(0,1)")
        ax_h.legend()
    ax_h.set_xlabel(f"q_{component + 1}")
    ax_h.set_ylabel("density")

    offset = 0
    for vals in chunks:
        ax_t.plot(np.arange(offset, offset + vals.size), vals,
                  lw=0.4, color="0.3")
        offset += vals.size
        if len(chunks) > 1 and offset < pooled.size:
            ax_t.axvline(offset, color="red", lw=0.8)
    ax_t.set_xlabel("sample")
    ax_t.set_ylabel(f"q_{component + 1}")
    fig.tight_layout()
    return fig


def plot_rmse_curves(rmse_csv):
    """One panel per target: RMSE against beta (log x) per strategy, with
    the iid-benchmark RMSE as a horizontal line."""
    rows = io.read_rmse(rmse_csv)
    targets = sorted({r["target"] for r in rows})
    fig, axes = plt.subplots(1, len(targets),
                             figsize=(4 * len(targets), 3.5), squeeze=False)
    for ax, target in zip(axes[0], targets):
        sub = [r for r in rows if r["target"] == target]
        strategies = sorted({r["strategy"] for r in sub})
        for s in strategies:
            pts = sorted([(r["beta"], r["rmse"]) for r in sub
                          if r["strategy"] == s])
            marker, color = STRATEGY_MARKERS.get(s, ("d", "tab:purple"))
            ax.plot([p[0] for p in pts], [p[1] for p in pts],
                    marker=marker, color=color, lw=1, label=s)
        ax.axhline(sub[0]["benchmark_rmse"], color="0.4", ls="-", lw=1)
        ax.set_xscale("log")
        ax.set_title(target)
        ax.set_xlabel("beta")
        ax.set_ylabel("RMSE of E(q1) estimate")
        ax.legend(fontsize=7)
    fig.tight_layout()
    return fig


def plot_precision_curves(precision_csv):
    """One panel per moment: paired integrator discrepancy against the
    tolerance (log-log), one line per horizon T, with the exact-flow Monte
    Carlo RMSE as dashed reference lines."""
    rows = io.read_precision(precision_csv)
    moments = sorted({r["moment"] for r in rows})
    horizons = sorted({r["T"] for r in rows})
    fig, axes = plt.subplots(1, len(moments),
                             figsize=(3.2 * len(moments), 3.2), squeeze=False)
    cmap = plt.get_cmap("viridis")
    colors = {T: cmap(i / max(1, len(horizons) - 1))
              for i, T in enumerate(horizons)}
    for ax, moment in zip(axes[0], moments):
        sub = [r for r in rows if r["moment"] == moment]
        for T in horizons:
            pts = sorted([(r["tol"], r["pair_rms"]) for r in sub
                          if r["T"] == T])
            if not pts:
                continue
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                    color=colors[T], lw=1, label=f"T={T:g}")
            ref = [r["exact_mc_rmse"] for r in sub if r["T"] == T]
            ax.axhline(ref[0], color=colors[T], ls="--", lw=0.8)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_title(moment)
        ax.set_xlabel("tolerance")
        ax.set_ylabel("RMS discrepancy")
        ax.legend(fontsize=7)
    fig.tight_layout()
    return fig


@dataclass(frozen=True)
class FigureJob:
    """A renderable unit: figure kind, input CSVs, output image path."""

    kind: str
    inputs: tuple[str, ...]
    output: str
    component: int = 0
    reference: str | None = "norm"

    def run(self) -> Path:
        if self.kind == "trace-hist":
            fig = plot_trace_hist(list(self.inputs), component=self.component,
                                  reference=self.reference)
        elif self.kind == "rmse-curves":
            (path,) = self.inputs
            fig = plot_rmse_curves(path)
        elif self.kind == "precision-curves":
            (path,) = self.inputs
            fig = plot_precision_curves(path)
        else:
            raise ValueError(f"unknown figure kind {self.kind!r}")
        out = Path(self.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out, dpi=120)
        plt.close(fig)
        return out
