"""syncsim: output synchronization of coupled passive oscillators.

Library + CLI for simulating networks of incrementally passive nonlinear
oscillators coupled over undirected graphs, with adaptive and
internal-model controllers placed at the nodes or at the edges, and the
diagnostics (sync metrics, residual traces, gain monitors) that certify
each run.
"""

from .analysis import (
    GainReport,
    LyapunovTrace,
    SyncMetrics,
    eval_V1,
    eval_W1,
    eval_full_lyapunov,
    gain_monitor,
    sync_error,
)
from .controllers import (
    ControllerConfig,
    compute_H,
    edge_coupling,
    node_coupling,
)
from .exosystems import Exosystem, check_monotone, constant_exo, no_exo, rotation_exo
from .graphs import (
    Graph,
    GraphOperators,
    build_graph,
    operators,
    pseudoinverse,
    verify_paper_incidence,
)
from .plants import (
    LurePlant,
    PairSampler,
    check_iofp,
    check_passivity_certificate,
    chua,
    lure,
    vanderpol,
)
from .scenario import Scenario, build_closed_loop, load_scenario, preset_names
from .simulator import ClosedLoop, DivergenceGuard, Trajectory, rk4_step, simulate

__version__ = "0.1.0"

__all__ = [
    "ClosedLoop",
    "ControllerConfig",
    "DivergenceGuard",
    "Exosystem",
    "GainReport",
    "Graph",
    "GraphOperators",
    "LurePlant",
    "LyapunovTrace",
    "PairSampler",
    "Scenario",
    "SyncMetrics",
    "Trajectory",
    "build_closed_loop",
    "build_graph",
    "check_iofp",
    "check_monotone",
    "check_passivity_certificate",
    "chua",
    "compute_H",
    "constant_exo",
    "edge_coupling",
    "eval_V1",
    "eval_W1",
    "eval_full_lyapunov",
    "gain_monitor",
    "load_scenario",
    "lure",
    "no_exo",
    "node_coupling",
    "operators",
    "preset_names",
    "pseudoinverse",
    "rotation_exo",
    "simulate",
    "sync_error",
    "vanderpol",
    "verify_paper_incidence",
]
