import json

import numpy as np
import pytest

from syncsim.errors import ParseError, ValidationError
from syncsim.scenario import (
    build_closed_loop,
    load_scenario,
    preset_names,
    sim_settings,
    validate_scenario,
    write_scenario,
)

ALL_PRESETS = (
    "vdp_nodes", "vdp_edges", "vdp_dynedges", "vdp_dynedges_im",
    "vdp_dynedges_adaptive", "vdp_dynedges_adaptive_im",
)


def preset_dict(name: str) -> dict:
    return load_scenario(name).to_dict()


def test_bundled_presets_exist():
    assert set(ALL_PRESETS) <= set(preset_names())


@pytest.mark.parametrize("name", ALL_PRESETS)
def test_presets_validate_and_assemble(name):
    scn = load_scenario(name)
    loop = build_closed_loop(scn)
    assert loop.n_nodes == 4
    assert loop.plant.name == "vanderpol"


def test_vdp_nodes_preset_contents():
    scn = load_scenario("vdp_nodes")
    loop = build_closed_loop(scn)
    assert loop.cfg.family == "node_adaptive_im"
    assert np.array_equal(loop.node_bank.gamma, np.ones(4))
    assert round(loop.ops.lambda2, 1) == 0.4
    settings = sim_settings(scn)
    assert settings["T"] == 100.0 and settings["h"] == 1e-3
    assert settings["ic_box"] == (-3.0, 3.0)


def test_vdp_dynedges_im_preset_edge_models():
    scn = load_scenario("vdp_dynedges_im")
    loop = build_closed_loop(scn)
    assert loop.dyn_bank.labels == ("integrator",) * 3 + ("leaky",) * 3
    # the first three edges touch node 1 under lexicographic enumeration
    assert all(loop.graph.edges[g].i == 0 for g in range(3))
    assert loop.layout.names() == ("x", "w", "eta", "xi")


def test_wrong_exosystem_count_rejected():
    raw = preset_dict("vdp_nodes")
    raw["exosystems"] = raw["exosystems"][:3]
    with pytest.raises(ValidationError, match="exosystems"):
        validate_scenario(raw)


@pytest.mark.parametrize("mutate,path", [
    (lambda r: r.update(extra=1), "scenario"),
    (lambda r: r["graph"].update(weights=[]), "graph"),
    (lambda r: r["plant"].update(mu=2.0), "plant"),
    (lambda r: r["controller"].update(delta=[1] * 5), "controller"),
    (lambda r: r["sim"].update(dt=0.1), "sim"),
    (lambda r: r["output"].update(format="hdf5"), "output"),
])
def test_unknown_keys_rejected(mutate, path):
    raw = preset_dict("vdp_nodes")
    mutate(raw)
    with pytest.raises(ValidationError, match=path):
        validate_scenario(raw)


def test_unknown_family_rejected():
    raw = preset_dict("vdp_nodes")
    raw["controller"] = {"family": "pid"}
    with pytest.raises(ValidationError, match="controller.family"):
        validate_scenario(raw)


def test_gain_length_mismatch_rejected():
    raw = preset_dict("vdp_nodes")
    raw["controller"]["gamma"] = [1.0, 1.0]
    with pytest.raises(ValidationError, match="controller.gamma"):
        validate_scenario(raw)


def test_unknown_edge_model_rejected():
    raw = preset_dict("vdp_dynedges")
    raw["controller"]["edges"] = ["integrator"] * 5 + ["spring"]
    with pytest.raises(ValidationError, match="controller.edges"):
        validate_scenario(raw)


def test_bad_ic_box_rejected():
    raw = preset_dict("vdp_nodes")
    raw["sim"]["ic_box"] = [3.0, -3.0]
    with pytest.raises(ValidationError, match="ic_box"):
        validate_scenario(raw)


def test_bad_schema_version_rejected():
    raw = preset_dict("vdp_nodes")
    raw["version"] = 99
    with pytest.raises(ValidationError, match="version"):
        validate_scenario(raw)


def test_disturbances_forbidden_for_given_edges():
    raw = preset_dict("vdp_dynedges")
    raw["exosystems"] = preset_dict("vdp_nodes")["exosystems"]
    with pytest.raises(ValidationError):
        validate_scenario(raw)


def test_incomplete_graph_forbidden_for_edge_internal_models():
    raw = preset_dict("vdp_dynedges_im")
    raw["graph"] = preset_dict("vdp_nodes")["graph"]
    raw["controller"]["edges"] = raw["controller"]["edges"][:5]
    with pytest.raises(ValidationError):
        validate_scenario(raw)


def test_incidence_check_must_match_laplacian():
    raw = preset_dict("vdp_edges")
    raw["graph"]["incidence_check"][0][0] = 0.7
    with pytest.raises(ValidationError, match="incidence_check"):
        validate_scenario(raw)


def test_edge_list_form_equals_adjacency_form(tmp_path):
    raw = preset_dict("vdp_nodes")
    A = np.array(raw["graph"]["adjacency"])
    edges = [
        {"i": i + 1, "j": j + 1, "weight": A[i, j]}
        for i in range(4) for j in range(i + 1, 4) if A[i, j] > 0
    ]
    raw["graph"] = {"edges": edges, "n_nodes": 4}
    scn = validate_scenario(raw)
    loop = build_closed_loop(scn)
    ref = build_closed_loop(load_scenario("vdp_nodes"))
    assert np.allclose(loop.ops.laplacian, ref.ops.laplacian, atol=1e-12)


def test_round_trip(tmp_path):
    scn = load_scenario("vdp_edges")
    path = tmp_path / "copy.json"
    write_scenario(scn, path)
    again = load_scenario(str(path))
    assert again.raw == scn.raw
    assert again.digest() == scn.digest()


def test_missing_file_is_parse_error():
    with pytest.raises(ParseError):
        load_scenario("/nonexistent/path.json")


def test_invalid_json_is_parse_error(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    with pytest.raises(ParseError):
        load_scenario(str(p))


def test_explicit_initial_conditions_accepted(tmp_path):
    raw = preset_dict("vdp_nodes")
    raw["sim"]["x0"] = [0.1] * 8
    raw["sim"]["seed"] = 4
    scn = validate_scenario(raw)
    assert sim_settings(scn)["x0"] == [0.1] * 8


def test_wrong_x0_length_rejected():
    raw = preset_dict("vdp_nodes")
    raw["sim"]["x0"] = [0.1] * 7
    with pytest.raises(ValidationError, match="sim.x0"):
        validate_scenario(raw)
