"""Weighted undirected graphs and the algebraic objects built from them.

Everything the coupling laws need is derived here from one adjacency
matrix: the Laplacian L, a signed square-root-weighted incidence matrix B
with L = B B^T, Moore-Penrose pseudoinverses of both, the centering
projector Pi = I - (1/N) 11^T, and the algebraic connectivity lambda_2.
All arrays are dense and frozen read-only after construction, so graph
objects can be shared freely between concurrent runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    DimensionMismatchError,
    DisconnectedError,
    NegativeWeightError,
    NotSymmetricError,
    SelfLoopError,
)

SYMMETRY_TOL = 1e-12
# Eigenvalues at or below EIG_CUTOFF * max(1, lambda_max) count as zero.
# Connected Laplacians have a well-separated zero eigenvalue, so a relative
# cutoff is scale-safe.
EIG_CUTOFF = 1e-10


class Edge(NamedTuple):
    i: int      # tail node (receives -sqrt(weight) in the incidence matrix)
    j: int      # head node (receives +sqrt(weight))
    weight: float


@dataclass(frozen=True)
class Graph:
    """Validated weighted undirected graph.

    Edges are enumerated lexicographically on (i, j) with i < j; the tail
    node i carries the negative incidence sign. Node indices are 0-based
    internally (scenario files use 1-based indices).
    """

    n_nodes: int
    adjacency: np.ndarray
    edges: tuple[Edge, ...]

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def degree(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)


@dataclass(frozen=True)
class GraphOperators:
    """Dense operator bundle for a connected graph.

    laplacian L = diag(degrees) - A, incidence B with L = B B^T and
    B^T 1 = 0, pseudoinverses L+ and B+ = B^T L+, projector
    Pi = I - (1/N) 11^T (= B B+ = L L+), and lambda2 the smallest nonzero
    Laplacian eigenvalue.
    """

    laplacian: np.ndarray
    incidence: np.ndarray
    laplacian_pinv: np.ndarray
    incidence_pinv: np.ndarray
    projector: np.ndarray
    lambda2: float

    @property
    def n_nodes(self) -> int:
        return self.laplacian.shape[0]

    @property
    def n_edges(self) -> int:
        return self.incidence.shape[1]


@dataclass(frozen=True)
class IncidenceReport:
    """Result of checking a user-supplied incidence matrix against a graph."""

    max_residual: float
    tolerance: float
    passed: bool


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _require_symmetric(M: np.ndarray, what: str) -> None:
    scale = max(1.0, float(np.max(np.abs(M))) if M.size else 0.0)
    skew = float(np.max(np.abs(M - M.T))) if M.size else 0.0
    if skew > SYMMETRY_TOL * scale:
        raise NotSymmetricError(f"{what} is not symmetric: max |M - M^T| = {skew:.3e}")


def build_graph(adjacency) -> Graph:
    """Validate an adjacency matrix and enumerate its weighted edges.

    Raises NotSymmetricError, NegativeWeightError, SelfLoopError, or
    DisconnectedError. Connectivity is decided by counting near-zero
    Laplacian eigenvalues (exactly one is required).
    """
    A = np.array(adjacency, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatchError(f"adjacency must be square, got shape {A.shape}")
    _require_symmetric(A, "adjacency")
    A = 0.5 * (A + A.T)     # exact symmetry for the eigensolver
    if np.any(np.diag(A) != 0.0):
        raise SelfLoopError("adjacency has nonzero diagonal entries")
    if np.any(A < 0.0):
        raise NegativeWeightError("adjacency has negative entries")

    n = A.shape[0]
    edges = tuple(
        Edge(i, j, float(A[i, j]))
        for i in range(n)
        for j in range(i + 1, n)
        if A[i, j] > 0.0
    )
    g = Graph(n_nodes=n, adjacency=_freeze(A), edges=edges)
    _connectivity_check(_laplacian(g))
    return g


def _laplacian(g: Graph) -> np.ndarray:
    return np.diag(g.degree()) - g.adjacency


def _connectivity_check(L: np.ndarray) -> np.ndarray:
    """Return sorted Laplacian eigenvalues; raise if not exactly one is zero."""
    eigvals = np.linalg.eigvalsh(L)
    cutoff = EIG_CUTOFF * max(1.0, float(eigvals[-1]))
    n_zero = int(np.sum(eigvals <= cutoff))
    if n_zero != 1:
        raise DisconnectedError(
            f"graph is not connected: {n_zero} zero eigenvalue(s) in the Laplacian"
        )
    return eigvals


def pseudoinverse(M) -> np.ndarray:
    """Moore-Penrose pseudoinverse of a symmetric PSD matrix.

    Computed by symmetric eigendecomposition, inverting eigenvalues above
    the relative cutoff EIG_CUTOFF * max(1, lambda_max).
    """
    M = np.asarray(M, dtype=float)
    _require_symmetric(M, "matrix")
    Ms = 0.5 * (M + M.T)
    eigvals, U = np.linalg.eigh(Ms)
    cutoff = EIG_CUTOFF * max(1.0, float(np.max(np.abs(eigvals))) if eigvals.size else 0.0)
    inv = np.where(eigvals > cutoff, 1.0 / np.where(eigvals > cutoff, eigvals, 1.0), 0.0)
    return (U * inv) @ U.T


def operators(g: Graph) -> GraphOperators:
    """Assemble the operator bundle for a connected graph."""
    L = _laplacian(g)
    eigvals = _connectivity_check(L)
    # A single node is trivially synchronized; coupling conditions are vacuous.
    lambda2 = float(eigvals[1]) if g.n_nodes > 1 else float("inf")

    n, e = g.n_nodes, g.n_edges
    B = np.zeros((n, e))
    for k, (i, j, w) in enumerate(g.edges):
        r = np.sqrt(w)
        B[i, k] = -r
        B[j, k] = r

    L_pinv = pseudoinverse(L)
    B_pinv = B.T @ L_pinv       # B+ = B^T (B B^T)+
    Pi = np.eye(n) - np.ones((n, n)) / n
    return GraphOperators(
        laplacian=_freeze(L),
        incidence=_freeze(B),
        laplacian_pinv=_freeze(L_pinv),
        incidence_pinv=_freeze(B_pinv),
        projector=_freeze(Pi),
        lambda2=lambda2,
    )


def verify_paper_incidence(g: Graph, B_given, tol: float = 1e-10) -> IncidenceReport:
    """Check that a printed incidence matrix reproduces the graph Laplacian.

    Only B B^T enters the closed-loop dynamics, so any column order and any
    per-edge orientation are accepted; the report compares B B^T against
    the Laplacian elementwise.
    """
    B = np.asarray(B_given, dtype=float)
    if B.ndim != 2 or B.shape[0] != g.n_nodes or B.shape[1] != g.n_edges:
        raise DimensionMismatchError(
            f"incidence must be {g.n_nodes}x{g.n_edges}, got {B.shape}"
        )
    residual = float(np.max(np.abs(B @ B.T - _laplacian(g))))
    return IncidenceReport(max_residual=residual, tolerance=tol, passed=residual <= tol)


def complete_uniform_weight(g: Graph) -> float:
    """Return the common weight of a complete uniformly weighted graph.

    Raises NotCompleteGraphError / NonUniformWeightError otherwise; used by
    the controller families whose guarantees hold only on such graphs.
    """
    from .errors import NonUniformWeightError, NotCompleteGraphError

    A = g.adjacency
    off = A[~np.eye(g.n_nodes, dtype=bool)]
    if np.any(off <= 0.0):
        raise NotCompleteGraphError("graph is not complete: some a_ij = 0")
    a = float(off[0])
    if np.max(np.abs(off - a)) > SYMMETRY_TOL * max(1.0, a):
        raise NonUniformWeightError("edge weights are not uniform")
    return a
