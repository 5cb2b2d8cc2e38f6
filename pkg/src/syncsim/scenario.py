"""Scenario files: strict loading, validation, and closed-loop assembly.

A scenario is a JSON document with a schema version and six blocks (graph,
plant, exosystems, controller, sim, output). Node and edge indices in
files are 1-based to match the usual matrix notation; they are converted
to 0-based indices internally. Unknown keys anywhere are rejected, and
every validation error carries the offending field path.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import controllers, exosystems, graphs, plants
from .controllers import ControllerConfig
from .errors import ParseError, SyncsimError, ValidationError
from .simulator import ClosedLoop, DivergenceGuard

SCHEMA_VERSION = 1

_GRAPH_KEYS = {"adjacency", "edges", "n_nodes", "incidence_check"}
_PLANT_KEYS = {
    "vanderpol": {"type", "nu"},
    "chua": {"type", "c1", "c2", "tau_b", "tau_star", "z0", "z1", "z2"},
    "lure": {"type", "A", "B", "C", "P", "sigma", "tau_star", "phi"},
}
_EXO_KEYS = {
    "constant": {"type", "w0", "dim"},
    "rotation": {"type", "omega", "w0", "R"},
    "none": {"type"},
}
_CONTROLLER_KEYS = {
    "node_adaptive_im": {"family", "gamma", "adaptive", "static_gain"},
    "edge_adaptive_im": {"family", "delta"},
    "dynamic_edges": {"family", "edges"},
    "dynamic_edges_im": {"family", "edges"},
    "dynamic_edges_adaptive": {"family", "edges", "delta"},
    "dynamic_edges_adaptive_im": {"family", "edges", "delta"},
    "static_diffusive": {"family"},
}
_SIM_KEYS = {"T", "h", "seed", "ic_box", "x0", "w0", "eta0",
             "divergence_threshold", "max_steps"}
_OUTPUT_KEYS = {"dir", "stride", "plots", "channels"}
_TOP_KEYS = {"version", "name", "description", "graph", "plant", "exosystems",
             "controller", "sim", "output"}


@dataclass
class Scenario:
    """Validated scenario; `raw` is the canonical dict it round-trips to."""

    name: str
    description: str
    raw: dict = field(repr=False)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(self.raw))

    def digest(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @property
    def graph_block(self) -> dict:
        return self.raw["graph"]

    @property
    def plant_block(self) -> dict:
        return self.raw["plant"]

    @property
    def exo_blocks(self):
        return self.raw.get("exosystems")

    @property
    def controller_block(self) -> dict:
        return self.raw["controller"]

    @property
    def sim_block(self) -> dict:
        return self.raw["sim"]

    @property
    def output_block(self) -> dict:
        return self.raw.get("output", {})


# ----------------------------------------------------------------- checking

def _check_keys(block: dict, allowed: set, path: str) -> None:
    unknown = set(block) - allowed
    if unknown:
        raise ValidationError(path, f"unknown key(s) {sorted(unknown)}")


def _require(block: dict, key: str, path: str):
    if key not in block:
        raise ValidationError(path, f"missing required key '{key}'")
    return block[key]


def _number(value, path: str, positive: bool = False) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ValidationError(path, f"expected a number, got {value!r}")
    if positive and value <= 0:
        raise ValidationError(path, f"must be positive, got {value}")
    return float(value)


def _matrix(value, path: str) -> np.ndarray:
    try:
        M = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(path, f"not a numeric matrix: {exc}")
    if M.ndim != 2:
        raise ValidationError(path, f"expected a 2-D matrix, got ndim={M.ndim}")
    return M


def _vector(value, path: str) -> np.ndarray:
    try:
        v = np.array(value, dtype=float).reshape(-1)
    except (TypeError, ValueError) as exc:
        raise ValidationError(path, f"not a numeric vector: {exc}")
    return v


# ------------------------------------------------------------------ loading

def preset_names() -> list[str]:
    root = resources.files("syncsim").joinpath("presets")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def _read_source(path_or_name: str) -> tuple[str, str]:
    p = Path(path_or_name)
    if p.exists():
        return p.read_text(), str(p)
    if path_or_name in preset_names():
        text = resources.files("syncsim").joinpath(
            f"presets/{path_or_name}.json").read_text()
        return text, f"preset:{path_or_name}"
    raise ParseError(
        f"'{path_or_name}' is neither an existing file nor a preset "
        f"(presets: {', '.join(preset_names())})"
    )


def load_scenario(path_or_name: str) -> Scenario:
    """Load and validate a scenario file or a bundled preset by name."""
    text, origin = _read_source(path_or_name)
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{origin}: invalid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ParseError(f"{origin}: top level must be an object")
    return validate_scenario(raw)


def write_scenario(scn: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scn.raw, indent=2, sort_keys=True) + "\n")


def validate_scenario(raw: dict) -> Scenario:
    """Full structural validation; returns the Scenario on success."""
    _check_keys(raw, _TOP_KEYS, "scenario")
    version = _require(raw, "version", "scenario")
    if version != SCHEMA_VERSION:
        raise ValidationError("version", f"unsupported schema version {version}")
    name = raw.get("name", "unnamed")

    graph, ops = build_graph_ops(raw)
    n_nodes, n_edges = graph.n_nodes, graph.n_edges
    plant = build_plant(raw)
    q = plant.output_dim

    exo_blocks = raw.get("exosystems")
    if exo_blocks is not None:
        if not isinstance(exo_blocks, list):
            raise ValidationError("exosystems", "expected a list or null")
        if len(exo_blocks) != n_nodes:
            raise ValidationError(
                "exosystems", f"expected {n_nodes} blocks, got {len(exo_blocks)}"
            )
        for i, blk in enumerate(exo_blocks):
            _validate_exo_block(blk, q, f"exosystems[{i}]")

    ctrl = _require(raw, "controller", "scenario")
    fam = _require(ctrl, "family", "controller")
    if fam not in controllers.FAMILIES:
        raise ValidationError(
            "controller.family",
            f"unknown family '{fam}' (one of {', '.join(controllers.FAMILIES)})",
        )
    _check_keys(ctrl, _CONTROLLER_KEYS[fam], "controller")
    if "gamma" in ctrl and len(_vector(ctrl["gamma"], "controller.gamma")) != n_nodes:
        raise ValidationError("controller.gamma", f"expected {n_nodes} values")
    if "delta" in ctrl and len(_vector(ctrl["delta"], "controller.delta")) != n_edges:
        raise ValidationError("controller.delta", f"expected {n_edges} values")
    if "edges" in ctrl:
        models = ctrl["edges"]
        if not isinstance(models, list) or len(models) != n_edges:
            raise ValidationError("controller.edges", f"expected {n_edges} model names")
        bad = [m for m in models if m not in controllers.EDGE_MODELS]
        if bad:
            raise ValidationError("controller.edges", f"unknown model(s) {bad}")

    sim = _require(raw, "sim", "scenario")
    _check_keys(sim, _SIM_KEYS, "sim")
    _number(sim.get("T", 100.0), "sim.T", positive=True)
    _number(sim.get("h", 1e-3), "sim.h", positive=True)
    box = sim.get("ic_box", [-3.0, 3.0])
    if (not isinstance(box, list) or len(box) != 2
            or _number(box[0], "sim.ic_box[0]") >= _number(box[1], "sim.ic_box[1]")):
        raise ValidationError("sim.ic_box", "expected [low, high] with low < high")
    for key, size in (("x0", n_nodes * plant.state_dim), ("eta0", n_edges * q)):
        if key in sim and len(_vector(sim[key], f"sim.{key}")) != size:
            raise ValidationError(f"sim.{key}", f"expected {size} values")

    out = raw.get("output", {})
    _check_keys(out, _OUTPUT_KEYS, "output")
    if "stride" in out and (not isinstance(out["stride"], int) or out["stride"] < 1):
        raise ValidationError("output.stride", "expected a positive integer")
    if "channels" in out and out["channels"] not in ("all", "basic"):
        raise ValidationError("output.channels", "expected 'all' or 'basic'")

    scn = Scenario(name=name, description=raw.get("description", ""), raw=raw)
    # Final consistency pass: assembling the loop validates the family
    # hypotheses (complete graph, uniform weights, disturbance-free).
    build_closed_loop(scn)
    return scn


def _validate_exo_block(blk, q: int, path: str) -> None:
    if blk is None:
        return
    if not isinstance(blk, dict):
        raise ValidationError(path, "expected an object or null")
    kind = _require(blk, "type", path)
    if kind not in _EXO_KEYS:
        raise ValidationError(f"{path}.type", f"unknown exosystem type '{kind}'")
    _check_keys(blk, _EXO_KEYS[kind], path)
    if kind == "rotation":
        _number(_require(blk, "omega", path), f"{path}.omega")
        if "R" in blk and _matrix(blk["R"], f"{path}.R").shape != (q, 2):
            raise ValidationError(f"{path}.R", f"expected shape ({q}, 2)")
        if "w0" in blk and len(_vector(blk["w0"], f"{path}.w0")) != 2:
            raise ValidationError(f"{path}.w0", "expected 2 values")
    if kind == "constant":
        dim = blk.get("dim", q)
        if dim != q:
            raise ValidationError(f"{path}.dim", f"constant exosystem must have dim {q}")
        if "w0" in blk and len(_vector(blk["w0"], f"{path}.w0")) != q:
            raise ValidationError(f"{path}.w0", f"expected {q} values")


# ----------------------------------------------------------------- builders

def build_graph_ops(raw: dict):
    blk = _require(raw, "graph", "scenario")
    _check_keys(blk, _GRAPH_KEYS, "graph")
    if "adjacency" in blk:
        A = _matrix(blk["adjacency"], "graph.adjacency")
    elif "edges" in blk:
        n = blk.get("n_nodes")
        if not isinstance(n, int) or n < 2:
            raise ValidationError("graph.n_nodes", "edge lists need n_nodes >= 2")
        A = np.zeros((n, n))
        for idx, e in enumerate(blk["edges"]):
            path = f"graph.edges[{idx}]"
            if not isinstance(e, dict) or set(e) != {"i", "j", "weight"}:
                raise ValidationError(path, "expected {i, j, weight}")
            i, j = e["i"] - 1, e["j"] - 1       # files are 1-based
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise ValidationError(path, f"bad endpoints ({e['i']}, {e['j']})")
            A[i, j] = A[j, i] = _number(e["weight"], f"{path}.weight", positive=True)
    else:
        raise ValidationError("graph", "need 'adjacency' or 'edges'")
    try:
        g = graphs.build_graph(A)
        ops = graphs.operators(g)
    except SyncsimError as exc:
        raise ValidationError("graph", str(exc))
    if "incidence_check" in blk:
        B = _matrix(blk["incidence_check"], "graph.incidence_check")
        report = graphs.verify_paper_incidence(g, B)
        if not report.passed:
            raise ValidationError(
                "graph.incidence_check",
                f"B B^T does not match the Laplacian (residual {report.max_residual:.3e})",
            )
    return g, ops


def build_plant(raw: dict) -> plants.LurePlant:
    blk = _require(raw, "plant", "scenario")
    kind = _require(blk, "type", "plant")
    if kind not in _PLANT_KEYS:
        raise ValidationError("plant.type", f"unknown plant type '{kind}'")
    _check_keys(blk, _PLANT_KEYS[kind], "plant")
    try:
        if kind == "vanderpol":
            return plants.vanderpol(_number(_require(blk, "nu", "plant"), "plant.nu"))
        if kind == "chua":
            return plants.chua(
                c1=_number(_require(blk, "c1", "plant"), "plant.c1"),
                c2=_number(_require(blk, "c2", "plant"), "plant.c2"),
                tau_b=_number(_require(blk, "tau_b", "plant"), "plant.tau_b"),
                tau_star=_number(_require(blk, "tau_star", "plant"), "plant.tau_star"),
                z0=_number(_require(blk, "z0", "plant"), "plant.z0"),
                z1=_number(_require(blk, "z1", "plant"), "plant.z1"),
                z2=_number(_require(blk, "z2", "plant"), "plant.z2"),
            )
        phi_blk = _require(blk, "phi", "plant")
        phi_name = _require(phi_blk, "name", "plant.phi")
        if phi_name == "cubic_minus_linear":
            phi = plants.cubic_minus_linear(_number(_require(phi_blk, "gain", "plant.phi"), "plant.phi.gain"))
        elif phi_name == "piecewise_linear":
            phi = plants.piecewise_linear(
                tau_b=phi_blk["tau_b"], tau_star=phi_blk["tau_star"],
                z0=phi_blk["z0"], z1=phi_blk["z1"], z2=phi_blk["z2"],
            )
        else:
            raise ValidationError("plant.phi.name", f"unknown nonlinearity '{phi_name}'")
        return plants.lure(
            A=_matrix(blk["A"], "plant.A"), B_in=_matrix(blk["B"], "plant.B"),
            C_out=_matrix(blk["C"], "plant.C"), P=_matrix(blk["P"], "plant.P"),
            phi=phi, sigma=_number(_require(blk, "sigma", "plant"), "plant.sigma"),
            tau_star=_number(blk.get("tau_star", 1.0), "plant.tau_star"),
        )
    except SyncsimError:
        raise
    except (KeyError, ValueError) as exc:
        raise ValidationError("plant", f"bad plant block: {exc}")


def build_exos(raw: dict, q: int, n_nodes: int):
    blocks = raw.get("exosystems")
    if blocks is None:
        return None
    exos = []
    for blk in blocks:
        if blk is None or blk["type"] == "none":
            exos.append(exosystems.no_exo(q))
        elif blk["type"] == "constant":
            exos.append(exosystems.constant_exo(q, w0=blk.get("w0")))
        else:
            exos.append(exosystems.rotation_exo(
                omega=float(blk["omega"]), w0=blk.get("w0"), R=blk.get("R"), q=q,
            ))
    return exos


def build_controller_config(raw: dict) -> ControllerConfig:
    blk = raw["controller"]
    fam = blk["family"]
    return ControllerConfig(
        family=fam,
        gamma=np.asarray(blk["gamma"], float) if "gamma" in blk else None,
        delta=np.asarray(blk["delta"], float) if "delta" in blk else None,
        edge_models=tuple(blk["edges"]) if "edges" in blk else None,
        adaptive=bool(blk.get("adaptive", True)),
        static_gain=float(blk.get("static_gain", 1.0)),
    )


def build_closed_loop(scn: Scenario) -> ClosedLoop:
    raw = scn.raw
    g, ops = build_graph_ops(raw)
    plant = build_plant(raw)
    exos = build_exos(raw, plant.output_dim, g.n_nodes)
    cfg = build_controller_config(raw)
    try:
        return ClosedLoop(g, ops, plant, exos, cfg)
    except SyncsimError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError("controller", str(exc))


def sim_settings(scn: Scenario) -> dict:
    """Keyword arguments for `simulate`, plus the divergence guard."""
    sim = scn.sim_block
    return {
        "T": float(sim.get("T", 100.0)),
        "h": float(sim.get("h", 1e-3)),
        "seed": sim.get("seed"),
        "ic_box": tuple(sim.get("ic_box", (-3.0, 3.0))),
        "x0": sim.get("x0"),
        "w0": sim.get("w0"),
        "eta0": sim.get("eta0"),
        "guard": DivergenceGuard(threshold=float(sim.get("divergence_threshold", 1e6))),
        "max_steps": int(sim.get("max_steps", 2_000_000)),
    }
