"""Distributed controller families for output synchronization.

Four structures are covered, all driven purely by relative outputs:

* node-placed: per-node internal model xi_i plus a scalar adaptive gain k_i,
      xi_i' = s_i(xi_i) - R_i^T rho_i,  k_i' = gamma_i rho_i^T rho_i,
      u_i  = -R_i xi_i + k_i rho_i,
  with rho_i = sum_j a_ij (y_j - y_i), i.e. rho = -(L (x) I_q) y;

* edge-placed: per-edge internal model zeta_g of the full stacked generator
  plus a scalar adaptive gain kappa_g,
      zeta_g' = s(zeta_g) + H_g^T varrho_g,  kappa_g' = delta_g varrho_g^T varrho_g,
      v_g = H_g zeta_g + kappa_g varrho_g,   u = -(B (x) I_q) v,
  with varrho = (B^T (x) I_q) y and H = (B+ (x) I_q) R;

* given dynamic edges (input-strictly passive systems living on the edges),
  optionally combined with non-adaptive node internal models on complete
  uniformly weighted graphs, u_i = -R_i xi_i - sum_g b_ig v_g;

* adaptive add-ons for given passive edges, v_g = v_1g + kappa_g varrho_g.

Adaptive gains are nondecreasing by construction (their rates are squared
norms scaled by positive update gains).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    DisturbancesNotAllowedError,
    NonPositiveParameterError,
)
from .exosystems import Exosystem, stack_generators
from .graphs import Graph, GraphOperators, complete_uniform_weight

FAMILIES = (
    "node_adaptive_im",
    "edge_adaptive_im",
    "dynamic_edges",
    "dynamic_edges_im",
    "dynamic_edges_adaptive",
    "dynamic_edges_adaptive_im",
    "static_diffusive",
)

# Leak rate of the built-in edge models; both share the output v = eta + varrho
# and the storage 0.5 ||eta||^2, which makes them input strictly passive.
EDGE_MODELS = {"integrator": 0.0, "leaky": 1.0}


# ------------------------------------------------------------------ coupling

def node_coupling(y, ops: GraphOperators, q: int = 1) -> np.ndarray:
    """rho = -(L (x) I_q) y; row i equals sum_j a_ij (y_j - y_i)."""
    y = np.asarray(y, dtype=float)
    n = ops.n_nodes
    if y.size != n * q:
        raise DimensionMismatchError(f"expected stacked output of size {n * q}, got {y.size}")
    Y = y.reshape(n, q)
    return (-(ops.laplacian @ Y)).reshape(-1)


def edge_coupling(y, ops: GraphOperators, q: int = 1) -> np.ndarray:
    """varrho = (B^T (x) I_q) y; entry g is sum_j b_jg y_j."""
    y = np.asarray(y, dtype=float)
    n = ops.n_nodes
    if y.size != n * q:
        raise DimensionMismatchError(f"expected stacked output of size {n * q}, got {y.size}")
    Y = y.reshape(n, q)
    return (ops.incidence.T @ Y).reshape(-1)


def edge_plant_input(ops: GraphOperators, v, q: int = 1) -> np.ndarray:
    """u = -(B (x) I_q) v: push edge outputs back onto the nodes."""
    V = np.asarray(v, dtype=float).reshape(ops.n_edges, q)
    return (-(ops.incidence @ V)).reshape(-1)


# ------------------------------------------------------------ node controller

@dataclass(frozen=True)
class NodeControllerBank:
    """Parameters of the node-placed family (states live in the simulator).

    S_bd and R_bd are the block diagonals of the per-node generator copies;
    when `adaptive` is false the gain is frozen at `static_gain` and no k
    state exists.
    """

    S_bd: np.ndarray
    R_bd: np.ndarray
    gamma: np.ndarray
    n_nodes: int
    q: int
    m_total: int
    adaptive: bool = True
    static_gain: float = 1.0


def node_bank(exos: list[Exosystem], gamma, q: int, adaptive: bool = True,
              static_gain: float = 1.0) -> NodeControllerBank:
    S_bd, R_bd, _ = stack_generators(exos)
    gamma = np.asarray(gamma, dtype=float).reshape(len(exos))
    if adaptive and np.any(gamma <= 0.0):
        raise NonPositiveParameterError("update gains gamma must be positive")
    return NodeControllerBank(
        S_bd=S_bd, R_bd=R_bd, gamma=gamma, n_nodes=len(exos), q=q,
        m_total=S_bd.shape[0], adaptive=adaptive, static_gain=static_gain,
    )


def node_controller_derivative(bank: NodeControllerBank, xi, rho):
    """(xi', k') for stacked internal-model states xi and coupling rho."""
    xi_dot = bank.S_bd @ xi - bank.R_bd.T @ rho
    rho_mat = rho.reshape(bank.n_nodes, bank.q)
    k_dot = bank.gamma * np.einsum("iq,iq->i", rho_mat, rho_mat)
    return xi_dot, k_dot


def node_controller_output(bank: NodeControllerBank, xi, k, rho) -> np.ndarray:
    """u = -R xi + k rho with k a per-node array or a common scalar."""
    u = -(bank.R_bd @ xi)
    if np.isscalar(k):
        return u + k * rho
    rho_mat = rho.reshape(bank.n_nodes, bank.q)
    return u + (np.asarray(k)[:, None] * rho_mat).reshape(-1)


# ------------------------------------------------------------ edge controller

@dataclass(frozen=True)
class EdgeControllerBank:
    """Parameters of the edge-placed family.

    Every edge carries a copy of the full stacked generator (dimension
    m_total); H_blocks[g] is the q x m block row of H = (B+ (x) I_q) R.
    """

    S_bd: np.ndarray
    H: np.ndarray
    H_blocks: np.ndarray
    delta: np.ndarray
    n_edges: int
    q: int
    m_total: int


def compute_H(ops: GraphOperators, R_stack) -> np.ndarray:
    """H = (B+ (x) I_q) R_stack, shape (E*q, m)."""
    R_stack = np.asarray(R_stack, dtype=float)
    n = ops.n_nodes
    if R_stack.shape[0] % n != 0:
        raise DimensionMismatchError(
            f"R_stack rows ({R_stack.shape[0]}) must be a multiple of N = {n}"
        )
    q = R_stack.shape[0] // n
    return np.kron(ops.incidence_pinv, np.eye(q)) @ R_stack


def edge_bank(ops: GraphOperators, exos: list[Exosystem], delta, q: int) -> EdgeControllerBank:
    S_bd, R_bd, _ = stack_generators(exos)
    delta = np.asarray(delta, dtype=float).reshape(ops.n_edges)
    if np.any(delta <= 0.0):
        raise NonPositiveParameterError("update gains delta must be positive")
    H = compute_H(ops, R_bd)
    m = S_bd.shape[0]
    return EdgeControllerBank(
        S_bd=S_bd, H=H, H_blocks=H.reshape(ops.n_edges, q, m), delta=delta,
        n_edges=ops.n_edges, q=q, m_total=m,
    )


def edge_controller_derivative(bank: EdgeControllerBank, zeta, varrho):
    """(zeta', kappa') with zeta shaped (E, m) and varrho stacked (E*q,)."""
    vr = varrho.reshape(bank.n_edges, bank.q)
    zeta_dot = zeta @ bank.S_bd.T + np.einsum("gqm,gq->gm", bank.H_blocks, vr)
    kappa_dot = bank.delta * np.einsum("gq,gq->g", vr, vr)
    return zeta_dot, kappa_dot


def edge_controller_output(bank: EdgeControllerBank, zeta, kappa, varrho) -> np.ndarray:
    """v_g = H_g zeta_g + kappa_g varrho_g, stacked to (E*q,)."""
    vr = varrho.reshape(bank.n_edges, bank.q)
    V = np.einsum("gqm,gm->gq", bank.H_blocks, zeta) + np.asarray(kappa)[:, None] * vr
    return V.reshape(-1)


# ------------------------------------------------------------- dynamic edges

@dataclass(frozen=True)
class DynamicEdgeBank:
    """Given edge systems eta' = -leak * eta + varrho, v = eta + varrho.

    leak = 0 is the integrator edge, leak = 1 the leaky edge; both satisfy
    the input-strict dissipation Psi' <= -varrho^T varrho + v^T varrho with
    Psi = 0.5 ||eta||^2 (the integrator with equality).
    """

    leak: np.ndarray
    labels: tuple[str, ...]
    n_edges: int
    q: int
    passivity_class: str = "input_strictly_passive"


def dynamic_edge_bank(models: list[str], q: int) -> DynamicEdgeBank:
    unknown = [m for m in models if m not in EDGE_MODELS]
    if unknown:
        raise DimensionMismatchError(f"unknown edge model(s): {unknown}")
    leak = np.array([EDGE_MODELS[m] for m in models], dtype=float)
    return DynamicEdgeBank(leak=leak, labels=tuple(models), n_edges=len(models), q=q)


def dynamic_edge_derivative(bank: DynamicEdgeBank, eta, varrho) -> np.ndarray:
    vr = varrho.reshape(bank.n_edges, bank.q)
    return -bank.leak[:, None] * eta + vr


def dynamic_edge_output(bank: DynamicEdgeBank, eta, varrho) -> np.ndarray:
    vr = varrho.reshape(bank.n_edges, bank.q)
    return (eta + vr).reshape(-1)


def edge_storage(bank: DynamicEdgeBank, eta) -> np.ndarray:
    """Per-edge storage Psi_g = 0.5 ||eta_g||^2."""
    return 0.5 * np.einsum("gq,gq->g", eta, eta)


def edge_dissipation_residual(bank: DynamicEdgeBank, eta, varrho) -> np.ndarray:
    """Psi_g' - (-varrho_g^T varrho_g + v_g^T varrho_g), nonpositive per edge."""
    vr = varrho.reshape(bank.n_edges, bank.q)
    eta_dot = dynamic_edge_derivative(bank, eta, varrho)
    psi_dot = np.einsum("gq,gq->g", eta, eta_dot)
    v = (eta + vr)
    bound = -np.einsum("gq,gq->g", vr, vr) + np.einsum("gq,gq->g", v, vr)
    return psi_dot - bound


# ------------------------------------------------- composite input assemblies

def prop2_input(ops: GraphOperators, nbank: NodeControllerBank,
                dbank: DynamicEdgeBank, xi, eta, varrho) -> np.ndarray:
    """u_i = -R_i xi_i - sum_g b_ig v_g (internal model + given edges)."""
    v = dynamic_edge_output(dbank, eta, varrho)
    return -(nbank.R_bd @ xi) + edge_plant_input(ops, v, dbank.q)


def corollary_edge_adaptive_input(ops: GraphOperators, dbank: DynamicEdgeBank,
                                  eta, kappa, varrho,
                                  nbank: NodeControllerBank | None = None,
                                  xi=None) -> np.ndarray:
    """u = -(B (x) I_q)(v_1 + v_2) with v_2g = kappa_g varrho_g.

    With `nbank` and `xi` supplied the node internal-model feedforward
    -R_i xi_i is added on top (the complete-graph disturbance variant).
    """
    vr = varrho.reshape(dbank.n_edges, dbank.q)
    v = dynamic_edge_output(dbank, eta, varrho) + (np.asarray(kappa)[:, None] * vr).reshape(-1)
    u = edge_plant_input(ops, v, dbank.q)
    if nbank is not None:
        u = u - nbank.R_bd @ xi
    return u


# --------------------------------------------------------- family definitions

@dataclass(frozen=True)
class ControllerConfig:
    """Scenario-level controller selection, validated against the graph.

    gamma / delta are per-node / per-edge update gains; `edge_models` names
    the given dynamics on each edge for the dynamic families. `adaptive`
    and `static_gain` configure the degenerate node variants (fixed-gain
    internal model, or pure adaptation when no exosystems are declared).
    """

    family: str
    gamma: np.ndarray | None = None
    delta: np.ndarray | None = None
    edge_models: tuple[str, ...] | None = None
    adaptive: bool = True
    static_gain: float = 1.0


def require_disturbance_free(exos: list[Exosystem] | None, family: str) -> None:
    if exos is not None and any(e.dim > 0 for e in exos):
        raise DisturbancesNotAllowedError(
            f"{family} is only valid for disturbance-free scenarios"
        )


def validate_hypotheses(cfg: ControllerConfig, graph: Graph,
                        exos: list[Exosystem] | None) -> None:
    """Hard checks of each family's standing hypotheses.

    Complete uniform graph for the internal-model-with-given-edges variants,
    disturbance-free for the plain given-edge variants. Violations are
    errors, not warnings: outside these hypotheses the guarantees are void.
    """
    if cfg.family in ("dynamic_edges", "dynamic_edges_adaptive"):
        require_disturbance_free(exos, cfg.family)
    if cfg.family in ("dynamic_edges_im", "dynamic_edges_adaptive_im"):
        complete_uniform_weight(graph)
