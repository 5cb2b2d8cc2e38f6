"""Static figure rendering for finished runs.

Figures are written as standalone vector PDFs next to the CSV output:
first states, outputs, adaptive gains, sync error, and (when the scenario
has dynamic edges) the edge states, plus one stacked summary panel. Long
trajectories are thinned for drawing only; the CSV keeps the full data.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import LyapunovTrace, SyncMetrics
from .simulator import ClosedLoop, Trajectory

MAX_DRAW_POINTS = 20_000


def _thin(t: np.ndarray) -> slice:
    step = max(1, t.size // MAX_DRAW_POINTS)
    return slice(0, t.size, step)


def _line_plot(path: Path, t, series, labels, ylabel, title, logy=False):
    fig, ax = plt.subplots(figsize=(6.0, 3.2))
    sl = _thin(t)
    for col, lab in zip(series.T if series.ndim > 1 else [series], labels):
        ax.plot(t[sl], np.asarray(col)[sl], lw=0.9, label=lab)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    ax.set_title(title, fontsize=10)
    if len(labels) <= 8:
        ax.legend(fontsize=8, ncol=2, frameon=False)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def render_plots(out_dir: Path, loop: ClosedLoop, traj: Trajectory,
                 metrics: SyncMetrics, lyap: LyapunovTrace | None,
                 scenario_name: str) -> list[Path]:
    """Write the per-run figure files; returns the created paths."""
    out_dir = Path(out_dir)
    t = traj.t
    N = loop.n_nodes
    X = traj.block("x").reshape(t.size, N, loop.n)
    Y = traj.channels["y"].reshape(t.size, -1)
    paths = []

    def emit(name, *args, **kw):
        p = out_dir / name
        _line_plot(p, *args, **kw)
        paths.append(p)

    emit("states_x1.pdf", t, X[:, :, 0], [f"x_{i+1},1" for i in range(N)],
         "x_i,1", f"{scenario_name}: first states")
    emit("outputs.pdf", t, Y, [f"y_{i+1}" for i in range(N)],
         "y_i", f"{scenario_name}: outputs")
    for gname, G in traj.channels.get("gains", {}).items():
        emit(f"gains_{gname}.pdf", t, G,
             [f"{gname}_{j+1}" for j in range(G.shape[1])],
             gname, f"{scenario_name}: adaptive gains")
    emit("sync_error.pdf", t, np.maximum(metrics.total, 1e-300), ["e"],
         "||y - avg||", f"{scenario_name}: sync error", logy=True)
    if traj.layout.has("eta"):
        ETA = traj.block("eta")
        emit("edge_states.pdf", t, ETA,
             [f"eta_{g+1}" for g in range(ETA.shape[1])],
             "eta_g", f"{scenario_name}: edge states")
    if lyap is not None:
        emit("residual.pdf", t, np.maximum(lyap.values, 1e-300), ["V"],
             "composite residual", f"{scenario_name}: residual trace", logy=True)

    paths.append(_summary_panel(out_dir, loop, traj, scenario_name))
    return paths


def _summary_panel(out_dir: Path, loop: ClosedLoop, traj: Trajectory,
                   scenario_name: str) -> Path:
    """Stacked panel: first states on top, outputs in the middle, edge
    states at the bottom when the scenario has dynamic edges."""
    t = traj.t
    N = loop.n_nodes
    sl = _thin(t)
    X = traj.block("x").reshape(t.size, N, loop.n)
    Y = traj.channels["y"].reshape(t.size, -1)
    has_eta = traj.layout.has("eta")
    n_rows = 3 if has_eta else 2
    fig, axes = plt.subplots(n_rows, 1, figsize=(6.0, 2.4 * n_rows), sharex=True)
    for i in range(N):
        axes[0].plot(t[sl], X[sl, i, 0], lw=0.9, label=f"x_{i+1},1")
        axes[1].plot(t[sl], Y[sl, i], lw=0.9, label=f"y_{i+1}")
    axes[0].set_ylabel("x_i,1")
    axes[1].set_ylabel("y_i")
    if has_eta:
        ETA = traj.block("eta")
        for g in range(ETA.shape[1]):
            axes[2].plot(t[sl], ETA[sl, g], lw=0.9, label=f"eta_{g+1}")
        axes[2].set_ylabel("eta_g")
    for ax in axes:
        ax.legend(fontsize=7, ncol=3, frameon=False)
    axes[-1].set_xlabel("t")
    axes[0].set_title(scenario_name, fontsize=10)
    fig.tight_layout()
    path = out_dir / "summary.pdf"
    fig.savefig(path)
    plt.close(fig)
    return path
