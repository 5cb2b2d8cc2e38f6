"""Shared fixtures: the bundled weighted graph, the complete graph, and the
standard disturbance setup used across the suite."""

import numpy as np
import pytest

from syncsim.exosystems import constant_exo, rotation_exo
from syncsim.graphs import build_graph, operators
from syncsim.plants import vanderpol

# Weighted 4-node graph of the bundled presets (Laplacian = 0.09 * LBAR_INT,
# incidence = 0.3 * BBAR_INT up to per-edge orientation).
LBAR_INT = np.array([
    [5, -1, 0, -4],
    [-1, 14, -9, -4],
    [0, -9, 10, -1],
    [-4, -4, -1, 9],
], dtype=float)

BBAR_INT = np.array([
    [1, 0, 0, 0, 2],
    [-1, 3, 2, 0, 0],
    [0, -3, 0, 1, 0],
    [0, 0, -2, -1, -2],
], dtype=float)

# Incidence of the complete 4-node unit graph printed alongside it.
B_K4 = np.array([
    [1, 1, 1, 0, 0, 0],
    [-1, 0, 0, 1, 1, 0],
    [0, -1, 0, 0, -1, 1],
    [0, 0, -1, -1, 0, -1],
], dtype=float)


def weighted_adjacency() -> np.ndarray:
    L = 0.09 * LBAR_INT
    return np.diag(np.diag(L)) - L


@pytest.fixture(scope="session")
def weighted_graph():
    g = build_graph(weighted_adjacency())
    return g, operators(g)


@pytest.fixture(scope="session")
def complete_graph():
    A = np.ones((4, 4)) - np.eye(4)
    g = build_graph(A)
    return g, operators(g)


@pytest.fixture(scope="session")
def vdp_plant():
    return vanderpol(1.0)


@pytest.fixture()
def mixed_exos():
    """Two constant and two harmonic disturbance generators (q = 1)."""
    return [constant_exo(1), constant_exo(1), rotation_exo(1.0), rotation_exo(1.0)]
