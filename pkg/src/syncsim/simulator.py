"""Closed-loop assembly and fixed-step integration.

A ClosedLoop stacks N identical plants, their disturbance generators, and
one controller family into a single autonomous ODE with the state layout

    [ x (N*n) | w (sum m_i) | controller states | adaptive gains ]

and integrates it with classical RK4. Fixed stepping keeps runs bitwise
reproducible; a divergence guard halts on norm blow-up or non-finite
states and records the trip time. Controller states always start at zero;
plant, exosystem, and given-edge states are drawn uniformly from a seeded
box unless given explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .controllers import (
    ControllerConfig,
    DynamicEdgeBank,
    EdgeControllerBank,
    NodeControllerBank,
    dynamic_edge_bank,
    edge_bank,
    node_bank,
    validate_hypotheses,
)
from .errors import (
    DimensionMismatchError,
    NonFiniteDerivativeError,
    ValidationError,
)
from .exosystems import Exosystem, no_exo, stack_generators
from .graphs import Graph, GraphOperators
from .plants import LurePlant


def rk4_step(derivative, t: float, z: np.ndarray, h: float) -> np.ndarray:
    """One classical 4-stage Runge-Kutta step.

    Raises NonFiniteDerivativeError when the update is no longer finite
    (NaN or Inf anywhere in the stages propagates into the result).
    """
    k1 = derivative(t, z)
    k2 = derivative(t + 0.5 * h, z + (0.5 * h) * k1)
    k3 = derivative(t + 0.5 * h, z + (0.5 * h) * k2)
    k4 = derivative(t + h, z + h * k3)
    z_next = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.isfinite(z_next).all():
        raise NonFiniteDerivativeError(f"non-finite state update at t = {t:.6g}")
    return z_next


@dataclass(frozen=True)
class DivergenceGuard:
    """Runtime surrogate for the boundedness hypothesis of the theorems.

    Trips when the stacked state norm exceeds the threshold or any
    component stops being finite.
    """

    threshold: float = 1e6

    def tripped(self, z: np.ndarray) -> bool:
        if not np.isfinite(z).all():
            return True
        return float(np.linalg.norm(z)) > self.threshold


class StateLayout:
    """Named slices into the stacked state vector."""

    def __init__(self, blocks: list[tuple[str, int]]):
        self.blocks = tuple(blocks)
        self._slices = {}
        pos = 0
        for name, size in blocks:
            self._slices[name] = slice(pos, pos + size)
            pos += size
        self.dim = pos

    def slice(self, name: str) -> slice:
        return self._slices[name]

    def has(self, name: str) -> bool:
        return name in self._slices

    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.blocks)

    def size(self, name: str) -> int:
        s = self._slices[name]
        return s.stop - s.start


@dataclass
class Trajectory:
    """Integration result plus derived per-step channels.

    states has one row per stored step; channels (filled by the owning
    ClosedLoop after integration) carry y, u, d, the coupling signals, and
    the adaptive gains as (steps, ...) arrays.
    """

    t: np.ndarray
    states: np.ndarray
    layout: StateLayout
    status: str                   # completed | diverged | error
    h: float
    trip_time: float | None = None
    seed: int | None = None
    channels: dict = field(default_factory=dict)

    def block(self, name: str) -> np.ndarray:
        return self.states[:, self.layout.slice(name)]

    @property
    def n_steps(self) -> int:
        return self.states.shape[0] - 1


def integrate(derivative, z0: np.ndarray, T: float, h: float,
              guard: DivergenceGuard | None = None,
              max_steps: int = 2_000_000):
    """Fixed-step RK4 over [0, T]; returns (t, states, status, trip_time)."""
    if T <= 0.0 or h <= 0.0:
        raise ValidationError("sim", f"need T > 0 and h > 0, got T={T}, h={h}")
    n_steps = int(round(T / h))
    if n_steps > max_steps:
        raise ValidationError("sim", f"T/h = {n_steps} exceeds max_steps = {max_steps}")
    t = np.arange(n_steps + 1) * h
    Z = np.empty((n_steps + 1, z0.size))
    Z[0] = z0
    if guard is not None and guard.tripped(z0):
        return t[:1], Z[:1], "diverged", 0.0
    for i in range(n_steps):
        try:
            Z[i + 1] = rk4_step(derivative, t[i], Z[i], h)
        except NonFiniteDerivativeError:
            return t[: i + 1], Z[: i + 1], "error", float(t[i])
        if guard is not None and guard.tripped(Z[i + 1]):
            return t[: i + 2], Z[: i + 2], "diverged", float(t[i + 1])
    return t, Z, "completed", None


class ClosedLoop:
    """N homogeneous plants + exosystems + one controller family on a graph."""

    def __init__(self, graph: Graph, ops: GraphOperators, plants,
                 exos: list[Exosystem] | None, cfg: ControllerConfig):
        if isinstance(plants, LurePlant):
            plants = [plants] * graph.n_nodes
        if len(plants) != graph.n_nodes:
            raise DimensionMismatchError(
                f"need {graph.n_nodes} plants, got {len(plants)}"
            )
        if not all(p.same_dynamics(plants[0]) for p in plants[1:]):
            raise DimensionMismatchError("plants must share identical dynamics")
        self.graph = graph
        self.ops = ops
        self.plant = plants[0]
        self.n_nodes = graph.n_nodes
        self.n = self.plant.state_dim
        self.q = self.plant.output_dim

        if exos is not None and len(exos) != graph.n_nodes:
            raise DimensionMismatchError(
                f"need {graph.n_nodes} exosystems, got {len(exos)}"
            )
        self.has_disturbances = exos is not None and any(e.dim > 0 for e in exos)
        self.exos = exos if exos is not None else [no_exo(self.q)] * graph.n_nodes
        if any(e.output_dim != self.q for e in self.exos):
            raise DimensionMismatchError("exosystem output dimension must equal q")
        self.S_bd, self.R_bd, self.w_slices = stack_generators(self.exos)
        self.m_total = self.S_bd.shape[0]

        validate_hypotheses(cfg, graph, exos)
        self.cfg = cfg
        self.node_bank: NodeControllerBank | None = None
        self.edge_bank: EdgeControllerBank | None = None
        self.dyn_bank: DynamicEdgeBank | None = None

        N, E, q = self.n_nodes, graph.n_edges, self.q
        blocks = [("x", N * self.n), ("w", self.m_total)]
        fam = cfg.family
        if fam == "node_adaptive_im":
            gamma = np.ones(N) if cfg.gamma is None else cfg.gamma
            self.node_bank = node_bank(self.exos, gamma, q, cfg.adaptive, cfg.static_gain)
            blocks.append(("xi", self.m_total))
            if cfg.adaptive:
                blocks.append(("k", N))
        elif fam == "edge_adaptive_im":
            delta = np.ones(E) if cfg.delta is None else cfg.delta
            self.edge_bank = edge_bank(ops, self.exos, delta, q)
            blocks.append(("zeta", E * self.m_total))
            blocks.append(("kappa", E))
        elif fam in ("dynamic_edges", "dynamic_edges_im",
                     "dynamic_edges_adaptive", "dynamic_edges_adaptive_im"):
            models = cfg.edge_models or ("integrator",) * E
            if len(models) != E:
                raise DimensionMismatchError(f"need {E} edge models, got {len(models)}")
            self.dyn_bank = dynamic_edge_bank(list(models), q)
            blocks.append(("eta", E * q))
            if fam.endswith("_im"):
                self.node_bank = node_bank(self.exos, np.ones(N), q, adaptive=False)
                blocks.append(("xi", self.m_total))
            if "adaptive" in fam:
                delta = np.ones(E) if cfg.delta is None else np.asarray(cfg.delta, float)
                if np.any(delta <= 0.0):
                    raise ValidationError("controller.delta", "update gains must be positive")
                self.delta = delta
                blocks.append(("kappa", E))
        elif fam == "static_diffusive":
            pass
        else:
            raise ValidationError("controller.family", f"unknown family '{fam}'")
        self.layout = StateLayout(blocks)

    # ------------------------------------------------------------- assembly

    def make_rhs(self):
        """Closure computing the stacked derivative; all constants bound."""
        plant = self.plant
        N, n, q = self.n_nodes, self.n, self.q
        L = self.ops.laplacian
        B = self.ops.incidence
        S_bd, R_bd = self.S_bd, self.R_bd
        lay = self.layout
        sx, sw = lay.slice("x"), lay.slice("w")
        dim = lay.dim
        fam = self.cfg.family

        def base(z):
            X = z[sx].reshape(N, n)
            w = z[sw]
            Y = plant.output_batch(X)
            D = (R_bd @ w).reshape(N, q)
            return X, w, Y, D

        if fam == "node_adaptive_im":
            nbank = self.node_bank
            sxi = lay.slice("xi")
            adaptive = nbank.adaptive
            sk = lay.slice("k") if adaptive else None
            static_gain = nbank.static_gain

            def rhs(t, z):
                X, w, Y, D = base(z)
                Rho = -(L @ Y)
                rho = Rho.reshape(-1)
                xi = z[sxi]
                gain = z[sk] if adaptive else static_gain
                u = -(R_bd @ xi)
                if adaptive:
                    U = u.reshape(N, q) + gain[:, None] * Rho
                else:
                    U = u.reshape(N, q) + static_gain * Rho
                dz = np.empty(dim)
                dz[sx] = plant.derivative_batch(X, U, D).reshape(-1)
                dz[sw] = S_bd @ w
                dz[sxi] = S_bd @ xi - R_bd.T @ rho
                if adaptive:
                    dz[sk] = nbank.gamma * np.einsum("iq,iq->i", Rho, Rho)
                return dz
            return rhs

        if fam == "edge_adaptive_im":
            ebank = self.edge_bank
            E, m = ebank.n_edges, ebank.m_total
            H_blocks = ebank.H_blocks
            delta = ebank.delta
            szeta, skappa = lay.slice("zeta"), lay.slice("kappa")

            def rhs(t, z):
                X, w, Y, D = base(z)
                Vr = B.T @ Y
                zeta = z[szeta].reshape(E, m)
                kappa = z[skappa]
                V = np.einsum("gqm,gm->gq", H_blocks, zeta) + kappa[:, None] * Vr
                U = -(B @ V)
                dz = np.empty(dim)
                dz[sx] = plant.derivative_batch(X, U, D).reshape(-1)
                dz[sw] = S_bd @ w
                dz[szeta] = (zeta @ S_bd.T
                             + np.einsum("gqm,gq->gm", H_blocks, Vr)).reshape(-1)
                dz[skappa] = delta * np.einsum("gq,gq->g", Vr, Vr)
                return dz
            return rhs

        if fam == "static_diffusive":
            def rhs(t, z):
                X, w, Y, D = base(z)
                U = -(L @ Y)
                dz = np.empty(dim)
                dz[sx] = plant.derivative_batch(X, U, D).reshape(-1)
                dz[sw] = S_bd @ w
                return dz
            return rhs

        # remaining families all carry given dynamic edges
        dbank = self.dyn_bank
        E = dbank.n_edges
        leak = dbank.leak
        seta = lay.slice("eta")
        with_im = lay.has("xi")
        with_kappa = lay.has("kappa")
        sxi = lay.slice("xi") if with_im else None
        skappa = lay.slice("kappa") if with_kappa else None
        delta = getattr(self, "delta", None)

        def rhs(t, z):
            X, w, Y, D = base(z)
            Vr = B.T @ Y
            eta = z[seta].reshape(E, q)
            V = eta + Vr
            if with_kappa:
                V = V + z[skappa][:, None] * Vr
            U = -(B @ V)
            if with_im:
                U = U - (R_bd @ z[sxi]).reshape(N, q)
            dz = np.empty(dim)
            dz[sx] = plant.derivative_batch(X, U, D).reshape(-1)
            dz[sw] = S_bd @ w
            dz[seta] = (-leak[:, None] * eta + Vr).reshape(-1)
            if with_im:
                rho = -(L @ Y).reshape(-1)
                dz[sxi] = S_bd @ z[sxi] - R_bd.T @ rho
            if with_kappa:
                dz[skappa] = delta * np.einsum("gq,gq->g", Vr, Vr)
            return dz
        return rhs

    # ---------------------------------------------------- initial conditions

    def initial_state(self, seed: int | None = None, ic_box=(-3.0, 3.0),
                      x0=None, w0=None, eta0=None) -> np.ndarray:
        """Stacked initial state.

        The box draw order is fixed (x, then w, then eta) and every block is
        drawn even when later overridden, so a scenario's random stream does
        not depend on which pieces are pinned. Controller states and
        adaptive gains always start at zero.
        """
        rng = np.random.default_rng(seed)
        lo, hi = float(ic_box[0]), float(ic_box[1])
        lay = self.layout
        z0 = np.zeros(lay.dim)

        draw_x = rng.uniform(lo, hi, lay.size("x"))
        z0[lay.slice("x")] = draw_x if x0 is None else np.asarray(x0, float).reshape(-1)
        if self.m_total > 0:
            draw_w = rng.uniform(lo, hi, self.m_total)
            for e, sl in zip(self.exos, self.w_slices):
                if e.w0 is not None:
                    draw_w[sl] = e.w0
            if w0 is not None:
                draw_w = np.asarray(w0, float).reshape(self.m_total)
            z0[lay.slice("w")] = draw_w
        if lay.has("eta"):
            draw_eta = rng.uniform(lo, hi, lay.size("eta"))
            z0[lay.slice("eta")] = (
                draw_eta if eta0 is None else np.asarray(eta0, float).reshape(-1)
            )
        return z0

    # ------------------------------------------------------ derived channels

    def attach_channels(self, traj: Trajectory) -> None:
        """Fill traj.channels with y, u, d, couplings, and gains (vectorized)."""
        N, n, q = self.n_nodes, self.n, self.q
        lay = self.layout
        Z = traj.states
        steps = Z.shape[0]
        X = Z[:, lay.slice("x")].reshape(steps, N, n)
        Y = X @ self.plant.C_out.T
        W = Z[:, lay.slice("w")]
        D = (W @ self.R_bd.T).reshape(steps, N, q)
        Rho = -np.einsum("ij,tjq->tiq", self.ops.laplacian, Y)
        ch = {"y": Y, "d": D, "rho": Rho, "gains": {}}
        fam = self.cfg.family
        B = self.ops.incidence

        if fam == "node_adaptive_im":
            XI = Z[:, lay.slice("xi")]
            U = -(XI @ self.R_bd.T).reshape(steps, N, q)
            if self.node_bank.adaptive:
                K = Z[:, lay.slice("k")]
                U = U + K[:, :, None] * Rho
                ch["gains"]["k"] = K
            else:
                U = U + self.node_bank.static_gain * Rho
        elif fam == "static_diffusive":
            U = Rho.copy()
        else:
            Vr = np.einsum("ie,tiq->teq", B, Y)
            ch["varrho"] = Vr
            if fam == "edge_adaptive_im":
                E, m = self.edge_bank.n_edges, self.edge_bank.m_total
                ZETA = Z[:, lay.slice("zeta")].reshape(steps, E, m)
                KAPPA = Z[:, lay.slice("kappa")]
                V = (np.einsum("gqm,tgm->tgq", self.edge_bank.H_blocks, ZETA)
                     + KAPPA[:, :, None] * Vr)
                ch["gains"]["kappa"] = KAPPA
            else:
                ETA = Z[:, lay.slice("eta")].reshape(steps, self.graph.n_edges, q)
                V = ETA + Vr
                if lay.has("kappa"):
                    KAPPA = Z[:, lay.slice("kappa")]
                    V = V + KAPPA[:, :, None] * Vr
                    ch["gains"]["kappa"] = KAPPA
            U = -np.einsum("ie,teq->tiq", B, V)
            ch["v"] = V
            if lay.has("xi"):
                XI = Z[:, lay.slice("xi")]
                U = U - (XI @ self.R_bd.T).reshape(steps, N, q)
        ch["u"] = U
        traj.channels = ch


def simulate(loop: ClosedLoop, T: float = 100.0, h: float = 1e-3,
             guard: DivergenceGuard | None = None, seed: int | None = None,
             ic_box=(-3.0, 3.0), x0=None, w0=None, eta0=None,
             max_steps: int = 2_000_000) -> Trajectory:
    """Integrate a closed loop over [0, T] with step h.

    The returned Trajectory records the termination status rather than
    raising on divergence so that reports can always be written; callers
    that need an exception can inspect `status`.
    """
    guard = DivergenceGuard() if guard is None else guard
    z0 = loop.initial_state(seed=seed, ic_box=ic_box, x0=x0, w0=w0, eta0=eta0)
    t, Z, status, trip = integrate(loop.make_rhs(), z0, T, h, guard, max_steps)
    traj = Trajectory(
        t=t, states=Z, layout=loop.layout, status=status, h=h,
        trip_time=trip, seed=seed,
    )
    loop.attach_channels(traj)
    return traj
