import numpy as np
import pytest

from syncsim.analysis import (
    SyncMetrics,
    eval_V1,
    eval_W1,
    eval_full_lyapunov,
    gain_monitor,
    pairwise_storage_sum,
    sync_error,
)
from syncsim.controllers import ControllerConfig
from syncsim.errors import DimensionMismatchError, UnknownFamilyError
from syncsim.graphs import build_graph, operators
from syncsim.plants import vanderpol
from syncsim.simulator import ClosedLoop, simulate

from conftest import weighted_adjacency


# ---------------------------------------------------------------- sync error

def test_sync_error_zero_for_agreement():
    e, per = sync_error(np.full(4, 2.2), 4, 1)
    assert e == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(per, 0.0, atol=1e-12)


def test_sync_error_basis_vector():
    e, per = sync_error(np.array([1.0, 0.0, 0.0, 0.0]), 4, 1)
    assert e == pytest.approx(np.sqrt(0.75), abs=1e-12)
    assert np.allclose(per, [0.75, 0.25, 0.25, 0.25], atol=1e-12)


def test_sync_error_translation_invariant():
    rng = np.random.default_rng(1)
    y = rng.standard_normal(8)
    e1, _ = sync_error(y, 4, 2)
    e2, _ = sync_error(y + np.tile([5.0, -7.0], 4), 4, 2)
    assert e1 == pytest.approx(e2, rel=1e-12)


def test_sync_error_orthogonal_invariant():
    rng = np.random.default_rng(2)
    th = 0.83
    Q = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    Y = rng.standard_normal((4, 2))
    e1, _ = sync_error(Y.reshape(-1), 4, 2)
    e2, _ = sync_error((Y @ Q.T).reshape(-1), 4, 2)
    assert e1 == pytest.approx(e2, rel=1e-12)


def test_sync_error_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        sync_error(np.ones(5), 4, 1)


# ------------------------------------------------------------ quadratic forms

def test_eval_V1_agreement_is_zero(weighted_graph):
    _, ops = weighted_graph
    x = np.tile([1.3, -0.4], 4)
    assert eval_V1(x, ops, np.eye(2), debug=True) == pytest.approx(0.0, abs=1e-12)


def test_eval_V1_two_node_example():
    ops = operators(build_graph([[0.0, 1.0], [1.0, 0.0]]))
    x = np.array([1.0, 0.0, 0.0, 0.0])
    assert eval_V1(x, ops, np.eye(2), debug=True) == pytest.approx(1.0, abs=1e-12)


def test_eval_V1_matches_double_sum_randomly(weighted_graph):
    g, ops = weighted_graph
    rng = np.random.default_rng(3)
    P = np.array([[2.0, 0.3], [0.3, 1.0]])
    for _ in range(50):
        x = rng.standard_normal(8)
        v = eval_V1(x, ops, P, debug=True)
        assert v == pytest.approx(
            pairwise_storage_sum(x.reshape(4, 2), P, g.adjacency), abs=1e-10
        )


def test_eval_V1_quadratic_sandwich(weighted_graph):
    _, ops = weighted_graph
    rng = np.random.default_rng(4)
    P = np.array([[1.5, 0.2], [0.2, 0.8]])
    lamP = np.linalg.eigvalsh(P)
    lamL = np.linalg.eigvalsh(ops.laplacian)
    for _ in range(1000):
        x = rng.standard_normal(8)
        X = x.reshape(4, 2)
        Xt = X - X.mean(axis=0, keepdims=True)
        nrm = float(np.sum(Xt * Xt))
        v = eval_V1(x, ops, P)
        assert ops.lambda2 * lamP[0] * nrm <= v + 1e-9
        assert v <= lamL[-1] * lamP[-1] * nrm + 1e-9


def test_eval_W1_examples():
    assert eval_W1(np.tile([0.7, 0.7], 3), 3, np.eye(2)) == pytest.approx(0.0, abs=1e-12)
    x = np.array([1.0, 0.0, 0.0, 0.0])
    assert eval_W1(x, 2, np.eye(2), debug=True) == pytest.approx(0.5, abs=1e-12)


def test_eval_W1_translation_invariant():
    rng = np.random.default_rng(5)
    x = rng.standard_normal(6)
    shifted = x + np.tile([4.0, -2.0], 3)
    assert eval_W1(x, 3, np.eye(2)) == pytest.approx(
        eval_W1(shifted, 3, np.eye(2)), rel=1e-9
    )


# ------------------------------------------------------------ residual traces

def make_node_loop(mixed_exos):
    g = build_graph(weighted_adjacency())
    cfg = ControllerConfig(family="node_adaptive_im", gamma=np.ones(4))
    return ClosedLoop(g, operators(g), vanderpol(1.0), mixed_exos, cfg)


def test_full_lyapunov_zero_at_matched_steady_state(mixed_exos):
    loop = make_node_loop(mixed_exos)
    traj = simulate(loop, T=0.002, h=1e-3, seed=0)
    lam2 = loop.ops.lambda2
    k_star = 2.0 * loop.plant.sigma / lam2
    lay = loop.layout
    Z = traj.states.copy()
    Z[:, lay.slice("x")] = np.tile([0.8, -0.2], 4)     # synchronized states
    Z[:, lay.slice("xi")] = Z[:, lay.slice("w")]       # matched internal models
    Z[:, lay.slice("k")] = k_star
    traj.states = Z
    tr = eval_full_lyapunov(loop, traj)
    assert np.max(np.abs(tr.values)) < 1e-12
    assert tr.k_star == pytest.approx(k_star)
    assert tr.epsilon == pytest.approx(loop.plant.sigma * lam2)


def test_full_lyapunov_positive_and_nonincreasing(mixed_exos):
    loop = make_node_loop(mixed_exos)
    traj = simulate(loop, T=10.0, h=1e-3, seed=1)
    tr = eval_full_lyapunov(loop, traj)
    assert tr.values[0] > 0.0 and np.isfinite(tr.values[0])
    assert tr.nonincreasing(1e-8)
    assert tr.values[-1] < tr.values[0]


def test_full_lyapunov_unknown_for_static(mixed_exos):
    g = build_graph(weighted_adjacency())
    loop = ClosedLoop(g, operators(g), vanderpol(1.0), mixed_exos,
                      ControllerConfig(family="static_diffusive"))
    traj = simulate(loop, T=0.01, h=1e-3, seed=1)
    with pytest.raises(UnknownFamilyError):
        eval_full_lyapunov(loop, traj)


# -------------------------------------------------------------- gain monitor

def test_gains_constant_when_outputs_agree():
    # disturbance-free network started in agreement: coupling stays zero
    g = build_graph(weighted_adjacency())
    cfg = ControllerConfig(family="node_adaptive_im", gamma=np.ones(4))
    loop = ClosedLoop(g, operators(g), vanderpol(1.0), None, cfg)
    traj = simulate(loop, T=1.0, h=1e-3, x0=np.tile([0.5, 1.1], 4))
    rep = gain_monitor(traj)
    assert rep.nondecreasing and rep.plateaued
    assert np.max(np.abs(traj.block("k"))) < 1e-15


def test_gain_monitor_flags_injected_decrease(mixed_exos):
    loop = make_node_loop(mixed_exos)
    traj = simulate(loop, T=0.5, h=1e-3, seed=2)
    K = traj.channels["gains"]["k"].copy()
    K[250, 0] = K[249, 0] - 1.0
    traj.channels["gains"]["k"] = K
    assert not gain_monitor(traj).nondecreasing


def test_settling_metrics(mixed_exos):
    loop = make_node_loop(mixed_exos)
    traj = simulate(loop, T=2.0, h=1e-3, seed=1)
    m = SyncMetrics.from_trajectory(traj, tol=1e-2, dwell=1.0)
    assert m.total.shape == traj.t.shape
    assert m.per_node.shape == (traj.t.size, 4)
    assert not m.settled                 # far too short a horizon
