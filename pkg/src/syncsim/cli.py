"""Command-line interface: run scenarios, verify identities, list presets.

Exit codes: 0 success, 2 scenario validation failure, 3 divergence or
integration failure, 4 check failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import checks, scenario as scn_mod
from .errors import SyncsimError
from .output import analyze, write_csv, write_report
from .scenario import (
    Scenario,
    build_closed_loop,
    build_exos,
    build_graph_ops,
    build_plant,
    load_scenario,
    preset_names,
    sim_settings,
    validate_scenario,
)
from .simulator import simulate

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DIVERGED = 3
EXIT_CHECK_FAILED = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="syncsim",
        description="Simulate output synchronization of coupled passive oscillators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="simulate a scenario and write outputs")
    run_p.add_argument("scenario", help="scenario file path or preset name")
    run_p.add_argument("--seed", type=int, default=None, help="override the RNG seed")
    run_p.add_argument("--T", type=float, default=None, help="override the horizon")
    run_p.add_argument("--dt", type=float, default=None, help="override the step size")
    run_p.add_argument("--out", default=None, help="override the output directory")
    run_p.add_argument("--controller", default=None,
                       help="override the controller family")
    run_p.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    run_p.add_argument("--stride", type=int, default=None,
                       help="override the CSV row stride")

    check_p = sub.add_parser("check", help="run a verification battery")
    check_p.add_argument("what", choices=["graph", "passivity", "lemmas"])
    check_p.add_argument("scenario", help="scenario file path or preset name")

    presets_p = sub.add_parser("presets", help="bundled scenarios")
    presets_p.add_argument("action", choices=["list"])
    return parser


# ----------------------------------------------------------------- run

def _apply_overrides(scn: Scenario, args) -> Scenario:
    raw = scn.to_dict()
    if args.seed is not None:
        raw["sim"]["seed"] = args.seed
    if args.T is not None:
        raw["sim"]["T"] = args.T
    if args.dt is not None:
        raw["sim"]["h"] = args.dt
    out = raw.setdefault("output", {})
    if args.out is not None:
        out["dir"] = args.out
    if args.no_plots:
        out["plots"] = False
    if args.stride is not None:
        out["stride"] = args.stride
    if args.controller is not None:
        fam = args.controller
        old = raw.get("controller", {})
        new = {"family": fam}
        if fam.startswith("dynamic_edges"):
            if "edges" in old:
                new["edges"] = old["edges"]
            else:
                g, _ = build_graph_ops(raw)
                new["edges"] = ["integrator"] * g.n_edges
        raw["controller"] = new
    return validate_scenario(raw)


def _cmd_run(args) -> int:
    scn = _apply_overrides(load_scenario(args.scenario), args)
    loop = build_closed_loop(scn)
    settings = sim_settings(scn)
    out_block = scn.output_block
    out_dir = Path(out_block.get("dir", f"runs/{scn.name}"))
    out_dir.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    traj = simulate(loop, **settings)
    wall = time.perf_counter() - t0

    metrics, gains, lyap = analyze(loop, traj)
    stride = int(out_block.get("stride", 1))
    channels = out_block.get("channels", "all")
    csv_path = out_dir / "trajectory.csv"
    write_csv(csv_path, loop, traj, metrics, lyap, scn.name,
              stride=stride, channels=channels)
    files = [csv_path]
    if out_block.get("plots", True):
        from .plotting import render_plots
        files += render_plots(out_dir, loop, traj, metrics, lyap, scn.name)
    report_path = out_dir / "run_report.json"
    report = write_report(report_path, scn, traj, metrics, gains, lyap, wall,
                          files + [report_path])

    print(f"scenario {scn.name} (seed={traj.seed}): {traj.status} "
          f"in {wall:.1f} s, {traj.n_steps} steps")
    print(f"  final sync error {report['final_sync_error']:.3e}, "
          f"settle time {report['settle_time']}")
    if lyap is not None:
        print(f"  residual trace nonincreasing: {lyap.nonincreasing()} "
              f"(max step violation {lyap.max_step_violation():.2e})")
    if gains.names:
        print(f"  gains nondecreasing: {gains.nondecreasing}, "
              f"plateaued: {gains.plateaued}")
    print(f"  outputs in {out_dir}")
    return EXIT_OK if traj.status == "completed" else EXIT_DIVERGED


# ----------------------------------------------------------------- check

def _cmd_check(args) -> int:
    # Parse leniently: a scenario that fails its own battery (for example a
    # disconnected graph) must still reach the checker and report failure.
    text, _ = scn_mod._read_source(args.scenario)
    raw = json.loads(text)
    rows = []
    try:
        if args.what == "graph":
            g, ops = build_graph_ops(raw)
            B_given = raw["graph"].get("incidence_check")
            rows = checks.graph_battery(g, ops, B_given)
            print(f"graph: N={g.n_nodes}, E={g.n_edges}, lambda2={ops.lambda2:.9g}")
        elif args.what == "passivity":
            plant = build_plant(raw)
            rows = checks.passivity_battery(plant)
        else:
            g, ops = build_graph_ops(raw)
            plant = build_plant(raw)
            exos = build_exos(raw, plant.output_dim, g.n_nodes)
            rows = checks.lemma_battery(g, ops, plant.P, exos)
    except SyncsimError as exc:
        print(f"check {args.what}: FAIL ({exc})")
        return EXIT_CHECK_FAILED
    ok = True
    for row in rows:
        verdict = "pass" if row.passed else "FAIL"
        print(f"  [{verdict}] {row.name}: residual {row.residual:.3e} "
              f"(tol {row.tolerance:.1e})")
        ok = ok and row.passed
    print(f"check {args.what}: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _cmd_presets(_args) -> int:
    for name in preset_names():
        scn = load_scenario(name)
        print(f"{name:28s} {scn.description}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "check":
            return _cmd_check(args)
        return _cmd_presets(args)
    except SyncsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
