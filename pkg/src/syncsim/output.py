"""Deterministic run outputs: delimited trajectory files and run reports.

The CSV schema (column count and names) is a pure function of the scenario;
values are written with shortest round-trip float formatting, so identical
scenario + seed pairs produce byte-identical files. The JSON run report is
written for every run, including diverged and failed ones.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import GainReport, LyapunovTrace, SyncMetrics, eval_full_lyapunov, gain_monitor
from .simulator import ClosedLoop, Trajectory


@dataclass
class RunResult:
    """Everything the CLI reports about one finished run."""

    metrics: SyncMetrics
    gains: GainReport
    lyap: LyapunovTrace | None
    csv_path: Path | None
    report_path: Path | None
    plot_paths: list


def analyze(loop: ClosedLoop, traj: Trajectory, tol: float = 1e-2,
            dwell: float = 20.0):
    metrics = SyncMetrics.from_trajectory(traj, tol=tol, dwell=dwell)
    gains = gain_monitor(traj)
    lyap = None
    if loop.cfg.family != "static_diffusive" and traj.status == "completed":
        lyap = eval_full_lyapunov(loop, traj)
    return metrics, gains, lyap


# ---------------------------------------------------------------- CSV schema

def _node_state_names(loop: ClosedLoop) -> list[str]:
    return [f"x_{i + 1}_{k + 1}" for i in range(loop.n_nodes) for k in range(loop.n)]


def _per_node_names(prefix: str, n: int, q: int) -> list[str]:
    if q == 1:
        return [f"{prefix}_{i + 1}" for i in range(n)]
    return [f"{prefix}_{i + 1}_{c + 1}" for i in range(n) for c in range(q)]


def csv_columns(loop: ClosedLoop, channels: str = "all",
                with_lyap: bool = True) -> list[str]:
    """Ordered column names; depends only on the scenario structure."""
    N, q = loop.n_nodes, loop.q
    lay = loop.layout
    cols = ["t"] + _node_state_names(loop)
    if channels == "all":
        for i, e in enumerate(loop.exos):
            cols += [f"w_{i + 1}_{c + 1}" for c in range(e.dim)]
        if lay.has("xi"):
            cols += [f"xi_{i + 1}_{c + 1}"
                     for i, e in enumerate(loop.exos) for c in range(e.dim)]
        if lay.has("zeta"):
            E, m = loop.graph.n_edges, loop.m_total
            cols += [f"zeta_{g + 1}_{c + 1}" for g in range(E) for c in range(m)]
        if lay.has("eta"):
            cols += _per_node_names("eta", loop.graph.n_edges, q)
    cols += _per_node_names("y", N, q)
    cols += _per_node_names("u", N, q)
    cols += _per_node_names("d", N, q)
    if lay.has("k"):
        cols += [f"k_{i + 1}" for i in range(N)]
    if lay.has("kappa"):
        cols += [f"kappa_{g + 1}" for g in range(loop.graph.n_edges)]
    cols += ["e"] + [f"err_{i + 1}" for i in range(N)]
    if with_lyap:
        cols.append("lyap")
    return cols


def _csv_matrix(loop: ClosedLoop, traj: Trajectory, metrics: SyncMetrics,
                lyap: LyapunovTrace | None, channels: str) -> np.ndarray:
    steps = traj.states.shape[0]
    lay = traj.layout
    parts = [traj.t[:, None], traj.block("x")]
    if channels == "all":
        parts.append(traj.block("w"))
        for name in ("xi", "zeta", "eta"):
            if lay.has(name):
                parts.append(traj.block(name))
    for name in ("y", "u", "d"):
        parts.append(traj.channels[name].reshape(steps, -1))
    if lay.has("k"):
        parts.append(traj.block("k"))
    if lay.has("kappa"):
        parts.append(traj.block("kappa"))
    parts += [metrics.total[:, None], metrics.per_node]
    if lyap is not None:
        parts.append(lyap.values[:, None])
    return np.hstack(parts)


def write_csv(path: Path, loop: ClosedLoop, traj: Trajectory,
              metrics: SyncMetrics, lyap: LyapunovTrace | None,
              scenario_name: str, stride: int = 1, channels: str = "all") -> None:
    cols = csv_columns(loop, channels, with_lyap=lyap is not None)
    data = _csv_matrix(loop, traj, metrics, lyap, channels)
    assert data.shape[1] == len(cols), (data.shape, len(cols))
    rows = list(range(0, data.shape[0], stride))
    if rows[-1] != data.shape[0] - 1:
        rows.append(data.shape[0] - 1)
    with open(path, "w") as fh:
        fh.write(f"# scenario={scenario_name} seed={traj.seed} "
                 f"T={float(traj.t[-1])!r} h={float(traj.h)!r} status={traj.status}\n")
        fh.write(",".join(cols) + "\n")
        for r in rows:
            fh.write(",".join(repr(float(v)) for v in data[r]) + "\n")


# ---------------------------------------------------------------- run report

def write_report(path: Path, scn, traj: Trajectory, metrics: SyncMetrics,
                 gains: GainReport, lyap: LyapunovTrace | None,
                 wall_clock_s: float, files: list) -> dict:
    report = {
        "scenario": scn.name,
        "scenario_digest": scn.digest(),
        "seed": traj.seed,
        "T": float(traj.t[-1]),
        "h": traj.h,
        "status": traj.status,
        "trip_time": traj.trip_time,
        "final_sync_error": float(metrics.total[-1]),
        "final_sync_max_node": float(metrics.per_node[-1].max()),
        "settle_time": metrics.settle_time,
        "settled": metrics.settled,
        "sync_tolerance": metrics.tol,
        "gains_final": {k: np.asarray(v).tolist() for k, v in gains.final.items()},
        "gains_nondecreasing": gains.nondecreasing,
        "gains_plateaued": gains.plateaued,
        "lyapunov": None,
        "wall_clock_s": wall_clock_s,
        "files": [str(f) for f in files],
    }
    if lyap is not None:
        report["lyapunov"] = {
            "family": lyap.family,
            "initial": float(lyap.values[0]),
            "final": float(lyap.values[-1]),
            "max_step_violation": lyap.max_step_violation(),
            "nonincreasing": lyap.nonincreasing(),
            "k_star": lyap.k_star,
            "kappa_star": lyap.kappa_star,
            "epsilon": lyap.epsilon,
        }
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report
