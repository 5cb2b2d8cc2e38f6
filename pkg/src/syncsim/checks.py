"""Verification batteries behind the `check` CLI subcommand.

Each battery returns rows of (name, residual, tolerance, passed) so the
CLI can print one line per identity with its worst withheld residual.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import eval_V1, laplacian_quadratic, pairwise_storage_sum
from .controllers import compute_H
from .exosystems import Exosystem, stack_generators
from .graphs import Graph, GraphOperators, build_graph, operators
from .plants import LurePlant, PairSampler, check_iofp, check_passivity_certificate


@dataclass(frozen=True)
class CheckRow:
    name: str
    residual: float
    tolerance: float
    passed: bool


def _row(name: str, residual: float, tol: float) -> CheckRow:
    return CheckRow(name, float(residual), tol, bool(residual <= tol))


def random_connected_graph(rng: np.random.Generator, max_nodes: int = 12) -> Graph:
    """Random weighted connected graph: a spanning tree plus random extras."""
    n = int(rng.integers(2, max_nodes + 1))
    A = np.zeros((n, n))
    for j in range(1, n):
        i = int(rng.integers(0, j))
        A[i, j] = A[j, i] = rng.uniform(0.1, 2.0)
    extra = rng.random((n, n)) < 0.3
    for i in range(n):
        for j in range(i + 1, n):
            if extra[i, j] and A[i, j] == 0.0:
                A[i, j] = A[j, i] = rng.uniform(0.1, 2.0)
    return build_graph(A)


def graph_battery(g: Graph, ops: GraphOperators, B_given=None,
                  tol: float = 1e-10) -> list[CheckRow]:
    L, B, Pi = ops.laplacian, ops.incidence, ops.projector
    n = g.n_nodes
    ones = np.ones(n)
    rows = [
        _row("L = B B^T", np.max(np.abs(B @ B.T - L)), tol),
        _row("B^T 1 = 0", np.max(np.abs(B.T @ ones)) if g.n_edges else 0.0, tol),
        _row("L 1 = 0", np.max(np.abs(L @ ones)), tol),
        _row("B B+ = Pi", np.max(np.abs(B @ ops.incidence_pinv - Pi)), tol),
        _row("L L+ = Pi", np.max(np.abs(L @ ops.laplacian_pinv - Pi)), tol),
        _row("Pi^2 = Pi", np.max(np.abs(Pi @ Pi - Pi)), tol),
        _row("Pi 1 = 0", np.max(np.abs(Pi @ ones)), tol),
    ]
    lam_full = np.linalg.eigvalsh(L)
    rows.append(_row("lambda2 vs eigensolve (relative)",
                     abs(ops.lambda2 - lam_full[1]) / max(1.0, abs(lam_full[1])), 1e-9))
    if B_given is not None:
        B_given = np.asarray(B_given, dtype=float)
        rows.append(_row("given B: B B^T = L",
                         np.max(np.abs(B_given @ B_given.T - L)), tol))
    return rows


def lemma_battery(g: Graph, ops: GraphOperators, P=None,
                  exos: list[Exosystem] | None = None, seed: int = 0,
                  n_random: int = 200, tol: float = 1e-10) -> list[CheckRow]:
    """Pairwise-sum identities, projector factorizations, and the
    feedforward matrix property, on the given graph and random ones."""
    rng = np.random.default_rng(seed)
    q = 2

    def lemma2_residual(graph: Graph, Lap: np.ndarray) -> float:
        n = graph.n_nodes
        theta = rng.standard_normal((n, q))
        var = rng.standard_normal((n, q))
        direct = 0.5 * np.einsum(
            "ij,ijq->", graph.adjacency,
            (theta[:, None, :] - theta[None, :, :]) * (var[:, None, :] - var[None, :, :]),
        )
        compact = laplacian_quadratic(theta, np.eye(q), Lap, var)
        uni = np.full((n, n), 1.0 / n)
        Pi_n = np.eye(n) - uni
        direct_uni = 0.5 * np.einsum(
            "ij,ijq->", uni,
            (theta[:, None, :] - theta[None, :, :]) * (var[:, None, :] - var[None, :, :]),
        )
        compact_uni = laplacian_quadratic(theta, np.eye(q), Pi_n, var)
        return max(abs(direct - compact), abs(direct_uni - compact_uni))

    worst = lemma2_residual(g, ops.laplacian)
    worst_proj = 0.0
    for _ in range(n_random):
        rg = random_connected_graph(rng)
        rops = operators(rg)
        worst = max(worst, lemma2_residual(rg, rops.laplacian))
        worst_proj = max(
            worst_proj,
            float(np.max(np.abs(rops.incidence @ rops.incidence_pinv - rops.projector))),
            float(np.max(np.abs(rops.laplacian @ rops.laplacian_pinv - rops.projector))),
        )
    rows = [
        _row("pairwise sum = Laplacian quadratic form", worst, tol),
        _row("B B+ = L L+ = Pi (random graphs)", worst_proj, tol),
    ]

    if P is not None:
        P = np.asarray(P, dtype=float)
        lamP = np.linalg.eigvalsh(P)
        lamL = np.linalg.eigvalsh(ops.laplacian)
        sandwich = 0.0
        for _ in range(200):
            x = rng.standard_normal(g.n_nodes * P.shape[0])
            X = x.reshape(g.n_nodes, -1)
            Xt = X - X.mean(axis=0, keepdims=True)
            v1 = eval_V1(x, ops, P, debug=True)
            nrm = float(np.sum(Xt * Xt))
            lo = ops.lambda2 * lamP[0] * nrm
            hi = lamL[-1] * lamP[-1] * nrm
            sandwich = max(sandwich, lo - v1, v1 - hi)
        rows.append(_row("quadratic sandwich bounds", sandwich, 1e-9))

    if exos is not None and any(e.dim > 0 for e in exos):
        _, R_bd, _ = stack_generators(exos)
        H = compute_H(ops, R_bd)
        q_out = exos[0].output_dim
        BI = np.kron(ops.incidence, np.eye(q_out))
        PiI = np.kron(ops.projector, np.eye(q_out))
        rows.append(_row("(B (x) I) H = (Pi (x) I) R",
                         np.max(np.abs(BI @ H - PiI @ R_bd)), tol))
    return rows


def passivity_battery(plant: LurePlant, sampler: PairSampler | None = None) -> list[CheckRow]:
    cert = check_passivity_certificate(plant)
    rows = [
        _row("max eig(A^T P + P A) <= 0", max(cert.max_eigenvalue, 0.0), cert.tolerance),
        _row("P B = C^T", cert.max_pb_residual, cert.tolerance),
    ]
    io = check_iofp(plant, plant.sigma, sampler)
    rows.append(_row(f"incremental dissipation (sigma={plant.sigma:g}, "
                     f"{io.count} pairs)", max(io.max_violation, 0.0), io.tolerance))
    return rows
