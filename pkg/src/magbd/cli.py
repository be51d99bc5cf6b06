"""Command-line entry point: ``solve``, ``sweep``, ``export-milp``, ``validate``.

Any scenario or solver key can be overridden with ``--set key=value``
(values are parsed as JSON when possible); the named flags are shortcuts
for the common ones.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys

import numpy as np

from .baselines import SCHEMES, oracle_exhaustive
from .experiments import (
    PRESETS,
    ExperimentSpec,
    TERMINAL_STATUSES,
    run_experiment,
    solve_once,
    solver_from_mapping,
)
from .gbd import SolverConfig, run
from .master import export_milp, solve_exported_milp, solve_master
from .scenario import ScenarioConfig, distance_matrix, load_config_file

SCENARIO_KEYS = {f.name for f in dataclasses.fields(ScenarioConfig)}
SOLVER_KEYS = {f.name for f in dataclasses.fields(SolverConfig)}

# shortcut flag -> config key
SHORTCUTS = {
    "M": "M", "K": "K", "l": "area_scale_l", "d": "step_d_m", "dmin": "dmin_m",
    "gamma_db": "gamma_db", "delta": "delta_w", "max_iter": "max_iter",
}


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _overrides(args) -> tuple[dict, dict]:
    scen, solv = {}, {}
    pairs = []
    for flag, key in SHORTCUTS.items():
        v = getattr(args, flag, None)
        if v is not None:
            pairs.append((key, v))
    for item in args.set or []:
        if "=" not in item:
            raise SystemExit(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        pairs.append((key.strip(), _parse_value(raw)))
    for key, v in pairs:
        if key in SCENARIO_KEYS:
            scen[key] = v
            if key == "dmin_m":
                solv[key] = v
        elif key in SOLVER_KEYS:
            solv[key] = v
        else:
            raise SystemExit(f"unknown configuration key {key!r}")
    return scen, solv


def _configs(args) -> tuple[ScenarioConfig, SolverConfig]:
    scen = PRESETS[args.preset].to_dict()
    solv = {}
    if args.config:
        data = load_config_file(args.config)
        scen.update(data.get("scenario", {}))
        solv.update(data.get("solver", {}))
    o_scen, o_solv = _overrides(args)
    scen.update(o_scen)
    solv.update(o_solv)
    scenario = ScenarioConfig.from_mapping(scen)
    solv.setdefault("dmin_m", scenario.dmin_m)
    return scenario, solver_from_mapping(solv)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON or TOML file with [scenario] and [solver] tables")
    p.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any scenario or solver key (repeatable)")
    p.add_argument("--M", type=int)
    p.add_argument("--K", type=int)
    p.add_argument("--l", type=float, help="area side in wavelengths")
    p.add_argument("--d", type=float, help="grid step, meters")
    p.add_argument("--dmin", type=float, help="minimum element spacing, meters")
    p.add_argument("--gamma-db", dest="gamma_db", type=float)
    p.add_argument("--delta", type=float, help="convergence tolerance, watts")
    p.add_argument("--max-iter", dest="max_iter", type=int)


def _json_default(o):
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def cmd_solve(args) -> int:
    scenario, solver = _configs(args)
    if args.verbose:
        solver = solver.replace(verbose=True)
    result, dump = solve_once(scenario, solver, args.scheme, args.seed)
    text = json.dumps(dump, indent=2, default=_json_default)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0 if dump["status"] in TERMINAL_STATUSES else 1


def cmd_sweep(args) -> int:
    data = load_config_file(args.spec)
    o_scen, o_solv = _overrides(args)
    if o_scen:
        data["scenario"] = {**data.get("scenario", {}), **o_scen}
    if o_solv:
        data["solver"] = {**data.get("solver", {}), **o_solv}
    for key in ("trials", "workers", "base_seed"):
        v = getattr(args, key)
        if v is not None:
            data[key] = v
    if args.csv:
        data["csv_path"] = args.csv
    if args.json:
        data["json_path"] = args.json
    if args.wall_time:
        data["record_wall_time"] = True
    spec = ExperimentSpec.from_mapping(data)
    res = run_experiment(spec)
    if not spec.csv_path:
        sys.stdout.write(res.csv_text)
    for point in res.summary["points"]:
        mean = point.get("mean_power_dbm")
        print(f"# {spec.axis}={point['sweep_value']:g} {point['scheme']}: "
              f"{point['feasible']}/{point['trials']} feasible"
              + (f", mean {mean:.3f} dBm" if mean is not None else ""), file=sys.stderr)
    return 0 if res.all_terminal else 1


def cmd_export_milp(args) -> int:
    scenario, solver = _configs(args)
    channel = scenario.channel(args.seed)
    D = distance_matrix(scenario.grid())
    res = run(channel, D, solver.replace(max_iter=args.cuts) if args.cuts else solver)
    text = export_milp(D, scenario.dmin_m, res.cuts, scenario.M)
    with open(args.out, "w") as fh:
        fh.write(text)
    bb = solve_master(D, scenario.dmin_m, res.cuts, scenario.M)
    eta, placement = solve_exported_milp(text, scenario.M, D.shape[0])
    print(json.dumps({"file": args.out, "cuts": len(res.cuts), "bb_eta": bb.eta,
                      "bb_placement": list(bb.placement), "milp_eta": eta,
                      "milp_placement": list(placement), "match": bb.eta == eta},
                     default=_json_default))
    return 0 if bb.eta == eta else 1


def cmd_validate(args) -> int:
    scenario, solver = _configs(args)
    D = distance_matrix(scenario.grid())
    failures = 0
    for seed in range(args.base_seed, args.base_seed + args.seeds):
        channel = scenario.channel(seed)
        g = run(channel, D, solver)
        o = oracle_exhaustive(channel, D, scenario.dmin_m, solver.gamma(scenario.K))
        tol = max(solver.delta_w, 1e-5 * o.power_w) if o.feasible else 0.0
        ok = (g.status == "optimal" and o.feasible and abs(g.power - o.power_w) <= tol) or (
            g.status == "infeasible" and not o.feasible)
        failures += not ok
        print(f"{'PASS' if ok else 'FAIL'} seed={seed} gbd={g.power!r} oracle={o.power_w!r} "
              f"iterations={g.iterations} status={g.status}")
    print(f"{args.seeds - failures}/{args.seeds} instances match the exhaustive oracle")
    return 0 if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="magbd", description="Movable-antenna placement and beamforming by GBD")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one instance")
    _common(p)
    p.add_argument("--scheme", choices=SCHEMES, default="gbd")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the JSON dump here instead of stdout")
    p.add_argument("--verbose", action="store_true", help="JSON-lines GBD trace on stderr")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="run an experiment spec file")
    p.add_argument("spec", help="JSON or TOML experiment spec")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--trials", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--base-seed", dest="base_seed", type=int)
    p.add_argument("--csv")
    p.add_argument("--json")
    p.add_argument("--wall-time", dest="wall_time", action="store_true",
                   help="record wall times in the CSV (breaks byte-reproducibility)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export-milp", help="write the master with its cut pool as an LP file")
    _common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cuts", type=int, help="stop the decomposition after this many cuts")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_milp)

    p = sub.add_parser("validate", help="compare GBD with exhaustive search")
    _common(p)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--base-seed", dest="base_seed", type=int, default=0)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
