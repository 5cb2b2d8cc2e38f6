"""Trajectory diagnostics mirroring the convergence arguments.

Provides synchronization error metrics, the graph-weighted storage sums and
their Laplacian quadratic-form equivalents (with a brute-force double-sum
cross-check), composite residual functions whose nonincrease certifies a
run, and monitoring of the adaptive gains.

Convention: the standalone quadratic forms `eval_V1` / `eval_W1` use the
pairwise storage (x_i - x_j)^T P (x_i - x_j), giving x~^T (L (x) P) x~ and
x~^T (Pi (x) P) x~. The composite traces in `eval_full_lyapunov` use half
that pairwise storage, which is the increment form whose derivative the
plants' dissipation inequality bounds with coefficient one on the input;
only with this factor do the internal-model cross terms cancel exactly and
the composite become nonincreasing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    MissingExoStatesError,
    UnknownFamilyError,
)
from .graphs import GraphOperators, complete_uniform_weight
from .simulator import ClosedLoop, Trajectory


# --------------------------------------------------------------- sync error

def sync_error(y, n_nodes: int, q: int):
    """(total centered norm, per-node deviations from the output average)."""
    y = np.asarray(y, dtype=float)
    if y.size != n_nodes * q:
        raise DimensionMismatchError(
            f"expected stacked output of size {n_nodes * q}, got {y.size}"
        )
    Y = y.reshape(n_nodes, q)
    Yt = Y - Y.mean(axis=0, keepdims=True)
    per_node = np.sqrt(np.einsum("iq,iq->i", Yt, Yt))
    return float(np.linalg.norm(Yt)), per_node


@dataclass
class SyncMetrics:
    """Per-step synchronization errors and a settling verdict.

    `settled` means max_i ||y_i - ybar|| stays below `tol` from
    `settle_time` to the end, with at least `dwell` time units of margin.
    """

    t: np.ndarray
    total: np.ndarray           # ||(Pi (x) I_q) y|| per step
    per_node: np.ndarray        # (steps, N)
    tol: float
    dwell: float
    settle_time: float | None
    settled: bool

    @classmethod
    def from_trajectory(cls, traj: Trajectory, tol: float = 1e-2,
                        dwell: float = 20.0) -> "SyncMetrics":
        Y = traj.channels["y"]
        Yt = Y - Y.mean(axis=1, keepdims=True)
        per_node = np.sqrt(np.einsum("tiq,tiq->ti", Yt, Yt))
        total = np.sqrt(np.einsum("ti,ti->t", per_node, per_node))
        worst = per_node.max(axis=1)
        above = np.nonzero(worst >= tol)[0]
        if above.size == 0:
            settle = float(traj.t[0])
        elif above[-1] + 1 < traj.t.size:
            settle = float(traj.t[above[-1] + 1])
        else:
            settle = None
        settled = settle is not None and settle <= float(traj.t[-1]) - dwell
        return cls(t=traj.t, total=total, per_node=per_node, tol=tol,
                   dwell=dwell, settle_time=settle, settled=settled)

    def window_max(self, t_from: float, t_to: float) -> float:
        """Largest per-node deviation over a time window."""
        mask = (self.t >= t_from) & (self.t <= t_to)
        return float(self.per_node[mask].max())

    def window_min_total(self, t_from: float, t_to: float) -> float:
        mask = (self.t >= t_from) & (self.t <= t_to)
        return float(self.total[mask].min())


# -------------------------------------------------- storage sums and Lemma 2

def pairwise_storage_sum(X: np.ndarray, P: np.ndarray, W: np.ndarray) -> float:
    """(1/2) sum_ij W_ij (x_i - x_j)^T P (x_i - x_j) by direct enumeration."""
    diff = X[:, None, :] - X[None, :, :]
    return 0.5 * float(np.einsum("ij,ijp,pq,ijq->", W, diff, P, diff))


def laplacian_quadratic(X: np.ndarray, P: np.ndarray, M: np.ndarray,
                        X2: np.ndarray | None = None) -> float:
    """sum_ij M_ij x_i^T P x2_j for a symmetric matrix M with M 1 = 0."""
    return float(np.einsum("ij,ip,pq,jq->", M, X, P, X if X2 is None else X2))


def eval_V1(x, ops: GraphOperators, P, debug: bool = False) -> float:
    """Graph-weighted storage sum x~^T (L (x) P) x~.

    With debug=True the pairwise double sum is evaluated independently and
    must agree to 1e-10 (absolute, scaled by the value).
    """
    P = np.asarray(P, dtype=float)
    n = ops.n_nodes
    X = np.asarray(x, dtype=float).reshape(n, -1)
    val = laplacian_quadratic(X, P, ops.laplacian)
    if debug:
        L = ops.laplacian
        A = np.diag(np.diag(L)) - L     # recover adjacency from the Laplacian
        ds = pairwise_storage_sum(X, P, A)
        if abs(ds - val) > 1e-10 * (1.0 + abs(val)):
            raise AssertionError(
                f"double-sum cross-check failed: {ds!r} vs {val!r}"
            )
    return val


def eval_W1(x, n_nodes: int, P, debug: bool = False) -> float:
    """Uniformly weighted storage sum x~^T (Pi (x) P) x~ (weights 1/N)."""
    P = np.asarray(P, dtype=float)
    X = np.asarray(x, dtype=float).reshape(n_nodes, -1)
    Pi = np.eye(n_nodes) - np.ones((n_nodes, n_nodes)) / n_nodes
    val = laplacian_quadratic(X, P, Pi)
    if debug:
        W = np.full((n_nodes, n_nodes), 1.0 / n_nodes)
        ds = pairwise_storage_sum(X, P, W)
        if abs(ds - val) > 1e-10 * (1.0 + abs(val)):
            raise AssertionError(
                f"double-sum cross-check failed: {ds!r} vs {val!r}"
            )
    return val


# ------------------------------------------------------------ residual trace

@dataclass
class LyapunovTrace:
    """Composite residual function evaluated along a stored trajectory."""

    t: np.ndarray
    values: np.ndarray
    family: str
    P: np.ndarray
    k_star: float | None = None
    kappa_star: float | None = None
    epsilon: float | None = None

    def max_step_violation(self, tol_scale: float = 1e-8) -> float:
        """max over steps of V(t+h) - V(t) - tol_scale * (1 + V(t))."""
        v = self.values
        return float(np.max(np.diff(v) - tol_scale * (1.0 + v[:-1])))

    def nonincreasing(self, tol_scale: float = 1e-8) -> bool:
        return self.max_step_violation(tol_scale) <= 0.0


def _state_quadratic_series(traj: Trajectory, loop: ClosedLoop, M: np.ndarray,
                            P: np.ndarray) -> np.ndarray:
    steps = traj.states.shape[0]
    X = traj.block("x").reshape(steps, loop.n_nodes, loop.n)
    return np.einsum("ij,tip,pq,tjq->t", M, X, P, X)


def eval_full_lyapunov(loop: ClosedLoop, traj: Trajectory,
                       k_star: float | None = None,
                       kappa_star: float | None = None,
                       P=None) -> LyapunovTrace:
    """Composite residual trace for the trajectory's controller family.

    The state part is half the graph-weighted (node case) or uniformly
    weighted (edge and given-edge cases) storage sum; internal-model and
    gain residuals are added per family. The proof constants default to
    k_star = kappa_star = 2 sigma / lambda_2, which makes the certified
    decrease margin epsilon positive without strong coupling.
    """
    fam = loop.cfg.family
    if fam == "static_diffusive":
        raise UnknownFamilyError("static_diffusive has no residual trace")
    P = loop.plant.P if P is None else np.asarray(P, dtype=float)
    sigma = loop.plant.sigma
    lam2 = loop.ops.lambda2
    lay = traj.layout
    if lay.has("xi") or lay.has("zeta"):
        if not lay.has("w"):
            raise MissingExoStatesError("trajectory lacks exosystem states")
    W = traj.block("w")

    if fam == "node_adaptive_im":
        vals = 0.5 * _state_quadratic_series(traj, loop, loop.ops.laplacian, P)
        XI = traj.block("xi")
        vals = vals + 0.5 * np.einsum("tm,tm->t", XI - W, XI - W)
        if loop.node_bank.adaptive:
            k_star = 2.0 * sigma / lam2 if k_star is None else k_star
            K = traj.block("k")
            vals = vals + np.einsum(
                "ti,i->t", (K - k_star) ** 2, 0.5 / loop.node_bank.gamma
            )
        else:
            k_star = loop.node_bank.static_gain
        eps = (k_star * lam2 - sigma) * lam2
        return LyapunovTrace(t=traj.t, values=vals, family=fam, P=P,
                             k_star=k_star, epsilon=eps)

    steps = traj.states.shape[0]
    Pi = np.eye(loop.n_nodes) - np.ones((loop.n_nodes, loop.n_nodes)) / loop.n_nodes
    vals = 0.5 * _state_quadratic_series(traj, loop, Pi, P)

    if fam == "edge_adaptive_im":
        kappa_star = 2.0 * sigma / lam2 if kappa_star is None else kappa_star
        E, m = loop.edge_bank.n_edges, loop.edge_bank.m_total
        ZETA = traj.block("zeta").reshape(steps, E, m)
        Zt = ZETA - W[:, None, :]
        vals = vals + 0.5 * np.einsum("tgm,tgm->t", Zt, Zt)
        KAPPA = traj.block("kappa")
        vals = vals + np.einsum(
            "tg,g->t", (KAPPA - kappa_star) ** 2, 0.5 / loop.edge_bank.delta
        )
        return LyapunovTrace(t=traj.t, values=vals, family=fam, P=P,
                             kappa_star=kappa_star, epsilon=kappa_star * lam2 - sigma)

    # given-edge families: add the edge storages, then the optional residuals
    ETA = traj.block("eta").reshape(steps, loop.graph.n_edges, loop.q)
    vals = vals + 0.5 * np.einsum("tgq,tgq->t", ETA, ETA)
    eps = lam2 - sigma
    if lay.has("xi"):
        a = complete_uniform_weight(loop.graph)
        XI = traj.block("xi")
        vals = vals + np.einsum("tm,tm->t", XI - W, XI - W) / (2.0 * a * loop.n_nodes)
    if lay.has("kappa"):
        kappa_star = 2.0 * sigma / lam2 if kappa_star is None else kappa_star
        KAPPA = traj.block("kappa")
        vals = vals + np.einsum("tg,g->t", (KAPPA - kappa_star) ** 2, 0.5 / loop.delta)
        eps = kappa_star * lam2 - sigma
    return LyapunovTrace(t=traj.t, values=vals, family=fam, P=P,
                         kappa_star=kappa_star, epsilon=eps)


# ------------------------------------------------------------- gain monitor

@dataclass
class GainReport:
    """Nondecrease and plateau verdicts for every adaptive gain."""

    names: tuple[str, ...]
    final: dict
    nondecreasing: bool
    max_decrease: float
    plateaued: bool
    plateau_tol: float

    @property
    def passed(self) -> bool:
        return self.nondecreasing


def gain_monitor(traj: Trajectory, plateau_tol: float = 1e-6,
                 tail_fraction: float = 0.1) -> GainReport:
    """Check the adaptive gains of a stored run.

    Every gain must be nondecreasing at every accepted step; `plateaued`
    holds when the relative change over the final `tail_fraction` of the
    horizon is below `plateau_tol` (the coupling signal has died out).
    """
    gains = traj.channels.get("gains", {})
    if not gains:
        return GainReport(names=(), final={}, nondecreasing=True,
                          max_decrease=0.0, plateaued=True, plateau_tol=plateau_tol)
    max_dec = 0.0
    plateaued = True
    final = {}
    tail = min(traj.t.size - 1,
               max(0, int(round(traj.t.size * (1.0 - tail_fraction))) - 1))
    for name, G in gains.items():
        max_dec = max(max_dec, float(np.max(-np.diff(G, axis=0), initial=0.0)))
        final[name] = G[-1].copy()
        rel = np.abs(G[-1] - G[tail]) / np.maximum(1.0, np.abs(G[-1]))
        plateaued = plateaued and bool(np.all(rel < plateau_tol))
    return GainReport(
        names=tuple(gains), final=final, nondecreasing=max_dec <= 1e-12,
        max_decrease=max_dec, plateaued=plateaued, plateau_tol=plateau_tol,
    )
