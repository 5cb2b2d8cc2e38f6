import numpy as np
import pytest

from syncsim.controllers import (
    ControllerConfig,
    compute_H,
    corollary_edge_adaptive_input,
    dynamic_edge_bank,
    dynamic_edge_derivative,
    dynamic_edge_output,
    edge_bank,
    edge_controller_derivative,
    edge_controller_output,
    edge_coupling,
    edge_dissipation_residual,
    edge_plant_input,
    edge_storage,
    node_bank,
    node_controller_derivative,
    node_controller_output,
    node_coupling,
    prop2_input,
    validate_hypotheses,
)
from syncsim.errors import (
    DimensionMismatchError,
    DisturbancesNotAllowedError,
    NonUniformWeightError,
    NotCompleteGraphError,
)
from syncsim.exosystems import constant_exo, rotation_exo
from syncsim.graphs import build_graph, operators

from conftest import LBAR_INT


def two_node_ops():
    return operators(build_graph([[0.0, 1.0], [1.0, 0.0]]))


def coupling_double_sum(A, Y):
    """rho_i = sum_j a_ij (y_j - y_i), the definition used as the oracle."""
    n = A.shape[0]
    return np.array([
        sum(A[i, j] * (Y[j] - Y[i]) for j in range(n)) for i in range(n)
    ])


# ----------------------------------------------------------------- couplings

def test_node_coupling_zero_for_agreeing_outputs(weighted_graph):
    _, ops = weighted_graph
    assert np.allclose(node_coupling(np.full(4, 1.7), ops), 0.0, atol=1e-12)


def test_node_coupling_two_node():
    ops = two_node_ops()
    assert np.allclose(node_coupling(np.array([1.0, 0.0]), ops), [-1.0, 1.0])


def test_node_coupling_weighted_first_basis_vector(weighted_graph):
    _, ops = weighted_graph
    rho = node_coupling(np.array([1.0, 0.0, 0.0, 0.0]), ops)
    assert np.allclose(rho, -0.09 * LBAR_INT[:, 0], atol=1e-12)
    assert np.allclose(rho, [-0.45, 0.09, 0.0, 0.36], atol=1e-12)


def test_node_coupling_matches_double_sum_on_random_graphs():
    from syncsim.checks import random_connected_graph

    rng = np.random.default_rng(21)
    for _ in range(25):
        g = random_connected_graph(rng, max_nodes=10)
        ops = operators(g)
        y = rng.standard_normal(g.n_nodes)
        assert np.allclose(node_coupling(y, ops),
                           coupling_double_sum(g.adjacency, y), atol=1e-10)


def test_node_coupling_dimension_mismatch(weighted_graph):
    _, ops = weighted_graph
    with pytest.raises(DimensionMismatchError):
        node_coupling(np.ones(3), ops)


def test_edge_coupling_zero_for_agreeing_outputs(weighted_graph):
    _, ops = weighted_graph
    assert np.allclose(edge_coupling(np.full(4, -0.3), ops), 0.0, atol=1e-12)


def test_edge_coupling_two_node_tail_negative():
    ops = two_node_ops()
    assert np.allclose(edge_coupling(np.array([1.0, 0.0]), ops), [-1.0])


def test_couplings_related_through_incidence(weighted_graph):
    _, ops = weighted_graph
    rng = np.random.default_rng(2)
    for _ in range(20):
        y = rng.standard_normal(4)
        rho = node_coupling(y, ops)
        varrho = edge_coupling(y, ops)
        assert np.allclose(rho, edge_plant_input(ops, varrho), atol=1e-12)


# ------------------------------------------------------------ node controller

def test_node_controller_at_rest(mixed_exos):
    bank = node_bank(mixed_exos, np.ones(4), q=1)
    xi_dot, k_dot = node_controller_derivative(bank, np.zeros(6), np.zeros(4))
    assert np.array_equal(xi_dot, np.zeros(6))
    assert np.array_equal(k_dot, np.zeros(4))
    assert np.array_equal(
        node_controller_output(bank, np.zeros(6), np.zeros(4), np.zeros(4)),
        np.zeros(4),
    )


def test_node_gain_rate_is_squared_coupling(mixed_exos):
    bank = node_bank(mixed_exos, np.ones(4), q=1)
    rho = np.array([2.0, 0.0, 0.0, 0.0])
    _, k_dot = node_controller_derivative(bank, np.zeros(6), rho)
    assert np.allclose(k_dot, [4.0, 0.0, 0.0, 0.0])


def test_node_controller_rotation_internal_model():
    exos = [rotation_exo(1.0)]
    bank = node_bank(exos, np.ones(1), q=1)
    xi = np.array([1.0, 0.0])
    rho = np.array([0.5])
    xi_dot, _ = node_controller_derivative(bank, xi, rho)
    assert np.allclose(xi_dot, [-0.5, -1.0])
    u = node_controller_output(bank, xi, np.array([2.0]), rho)
    assert np.allclose(u, [0.0])


def test_node_bank_rejects_nonpositive_gamma(mixed_exos):
    from syncsim.errors import NonPositiveParameterError

    with pytest.raises(NonPositiveParameterError):
        node_bank(mixed_exos, np.array([1.0, 1.0, 0.0, 1.0]), q=1)


# ------------------------------------------------------------ edge controller

def test_compute_H_two_node():
    ops = two_node_ops()
    R = np.eye(2)        # R_1 = R_2 = 1, stacked
    H = compute_H(ops, R)
    sign = np.sign(ops.incidence[1, 0])
    assert np.allclose(H, sign * np.array([[-0.5, 0.5]]), atol=1e-12)


def test_compute_H_zero_output_matrix(weighted_graph):
    _, ops = weighted_graph
    assert np.array_equal(compute_H(ops, np.zeros((4, 6))), np.zeros((5, 6)))


def test_compute_H_projector_property(weighted_graph, mixed_exos):
    _, ops = weighted_graph
    from syncsim.exosystems import stack_generators

    _, R_bd, _ = stack_generators(mixed_exos)
    H = compute_H(ops, R_bd)
    rng = np.random.default_rng(17)
    for _ in range(100):
        w = rng.standard_normal(6)
        lhs = ops.incidence @ (H @ w)
        rhs = ops.projector @ (R_bd @ w)
        assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_edge_controller_at_rest(weighted_graph, mixed_exos):
    _, ops = weighted_graph
    bank = edge_bank(ops, mixed_exos, np.ones(5), q=1)
    zeta = np.zeros((5, 6))
    zeta_dot, kappa_dot = edge_controller_derivative(bank, zeta, np.zeros(5))
    assert np.array_equal(zeta_dot, np.zeros((5, 6)))
    assert np.array_equal(kappa_dot, np.zeros(5))
    v = edge_controller_output(bank, zeta, np.zeros(5), np.zeros(5))
    assert np.array_equal(v, np.zeros(5))
    assert np.array_equal(edge_plant_input(ops, v), np.zeros(4))


def test_edge_inputs_sum_to_zero(weighted_graph):
    _, ops = weighted_graph
    rng = np.random.default_rng(5)
    for _ in range(20):
        v = rng.standard_normal(5)
        assert abs(edge_plant_input(ops, v).sum()) < 1e-12


def test_edge_gain_rate_example(weighted_graph, mixed_exos):
    _, ops = weighted_graph
    bank = edge_bank(ops, mixed_exos, np.ones(5), q=1)
    varrho = np.array([3.0, 0.0, 0.0, 0.0, 0.0])
    _, kappa_dot = edge_controller_derivative(bank, np.zeros((5, 6)), varrho)
    assert np.allclose(kappa_dot, [9.0, 0.0, 0.0, 0.0, 0.0])


def test_edge_gain_rate_vector_output():
    # q = 2: kappa' = delta * ||varrho_g||^2 = 2 * (1 + 1) = 4
    g = build_graph([[0.0, 1.0], [1.0, 0.0]])
    ops = operators(g)
    exos = [constant_exo(2), constant_exo(2)]
    bank = edge_bank(ops, exos, np.array([2.0]), q=2)
    _, kappa_dot = edge_controller_derivative(bank, np.zeros((1, 4)),
                                              np.array([1.0, 1.0]))
    assert np.allclose(kappa_dot, [4.0])


def test_feedforward_exactness(weighted_graph, mixed_exos):
    """With every edge internal model locked to the exosystem state and no
    adaptive action, the disturbance reaching each node is its average."""
    _, ops = weighted_graph
    from syncsim.exosystems import stack_generators

    _, R_bd, _ = stack_generators(mixed_exos)
    bank = edge_bank(ops, mixed_exos, np.ones(5), q=1)
    rng = np.random.default_rng(8)
    for _ in range(50):
        w = rng.uniform(-3, 3, 6)
        d = R_bd @ w
        zeta = np.tile(w, (5, 1))
        v = edge_controller_output(bank, zeta, np.zeros(5), np.zeros(5))
        u = edge_plant_input(ops, v)
        assert np.max(np.abs((u + d) - d.mean())) < 1e-9


# ------------------------------------------------------------- dynamic edges

def test_dynamic_edge_models():
    bank = dynamic_edge_bank(["integrator", "leaky"], q=1)
    eta = np.array([[2.0], [2.0]])
    varrho = np.array([1.0, 1.0])
    eta_dot = dynamic_edge_derivative(bank, eta, varrho)
    assert np.allclose(eta_dot, [[1.0], [-1.0]])
    assert np.allclose(dynamic_edge_output(bank, eta, varrho), [3.0, 3.0])


def test_dynamic_edge_rest():
    bank = dynamic_edge_bank(["integrator", "leaky"], q=1)
    eta = np.zeros((2, 1))
    assert np.allclose(dynamic_edge_derivative(bank, eta, np.zeros(2)), 0.0)
    assert np.allclose(dynamic_edge_output(bank, eta, np.zeros(2)), 0.0)


def test_dynamic_edge_dissipation_nonpositive():
    bank = dynamic_edge_bank(["integrator", "leaky"], q=1)
    rng = np.random.default_rng(13)
    for _ in range(200):
        eta = rng.uniform(-4, 4, (2, 1))
        varrho = rng.uniform(-4, 4, 2)
        res = edge_dissipation_residual(bank, eta, varrho)
        assert np.all(res <= 1e-12)
    assert np.allclose(edge_storage(bank, np.array([[2.0], [-1.0]])), [2.0, 0.5])


def test_unknown_edge_model_rejected():
    with pytest.raises(DimensionMismatchError):
        dynamic_edge_bank(["integrator", "spring"], q=1)


# --------------------------------------------- composite inputs and hypotheses

def test_prop2_input_at_rest(complete_graph, mixed_exos):
    _, ops = complete_graph
    nbank = node_bank(mixed_exos, np.ones(4), q=1, adaptive=False)
    dbank = dynamic_edge_bank(["integrator"] * 6, q=1)
    u = prop2_input(ops, nbank, dbank, np.zeros(6), np.zeros((6, 1)), np.zeros(6))
    assert np.array_equal(u, np.zeros(4))


def test_complete_graph_coupling_is_projector(complete_graph):
    _, ops = complete_graph
    rng = np.random.default_rng(31)
    for _ in range(20):
        y = rng.standard_normal(4)
        rho = node_coupling(y, ops)
        assert np.allclose(rho, -4.0 * (ops.projector @ y), atol=1e-12)


def test_hypothesis_checks():
    incomplete = build_graph([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    nonuniform = build_graph(np.array([[0, 1, 2], [1, 0, 1], [2, 1, 0]], float))
    complete = build_graph(np.ones((3, 3)) - np.eye(3))
    exos = [constant_exo(1)] * 3
    im_cfg = ControllerConfig(family="dynamic_edges_im",
                              edge_models=("integrator",) * 2)
    with pytest.raises(NotCompleteGraphError):
        validate_hypotheses(im_cfg, incomplete, exos)
    with pytest.raises(NonUniformWeightError):
        validate_hypotheses(im_cfg, nonuniform, exos)
    validate_hypotheses(im_cfg, complete, exos)

    free_cfg = ControllerConfig(family="dynamic_edges",
                                edge_models=("integrator",) * 3)
    with pytest.raises(DisturbancesNotAllowedError):
        validate_hypotheses(free_cfg, complete, exos)
    validate_hypotheses(free_cfg, complete, None)


def test_corollary_input_reduces_to_given_edges(complete_graph):
    _, ops = complete_graph
    dbank = dynamic_edge_bank(["integrator"] * 6, q=1)
    rng = np.random.default_rng(19)
    eta = rng.standard_normal((6, 1))
    varrho = rng.standard_normal(6)
    u_plain = edge_plant_input(ops, dynamic_edge_output(dbank, eta, varrho))
    u_cor = corollary_edge_adaptive_input(ops, dbank, eta, np.zeros(6), varrho)
    assert np.allclose(u_cor, u_plain, atol=1e-14)


def test_lemma2_bilinear_identity_random_graphs():
    from syncsim.analysis import laplacian_quadratic
    from syncsim.checks import random_connected_graph

    rng = np.random.default_rng(77)
    q = 2
    for _ in range(50):
        g = random_connected_graph(rng, max_nodes=10)
        ops = operators(g)
        n = g.n_nodes
        theta = rng.standard_normal((n, q))
        var = rng.standard_normal((n, q))
        direct = 0.5 * sum(
            g.adjacency[i, j] * (theta[i] - theta[j]) @ (var[i] - var[j])
            for i in range(n) for j in range(n)
        )
        compact = laplacian_quadratic(theta, np.eye(q), ops.laplacian, var)
        assert abs(direct - compact) < 1e-10
