"""Seeded experiment runner: single solves, scheme comparisons and sweeps.

Trial ``t`` of a sweep uses seed ``base_seed + t`` for every sweep value and
every scheme, so all schemes of a trial see the same channel draw and
sweeps over the grid compare the same propagation environment.
"""

from __future__ import annotations

import concurrent.futures
import csv
import dataclasses
import io
import json
import math
import os
import time

import numpy as np

from .baselines import (
    SCHEMES,
    SchemeResult,
    baseline_antenna_selection,
    baseline_ao_bcd,
    baseline_fixed_random,
    oracle_exhaustive,
    random_placement,
)
from .conic import ConicSolverError, Tolerances
from .gbd import SolverConfig, run
from .master import Placement
from .scenario import (
    ScenarioConfig,
    channel_matrix,
    distance_matrix,
    load_config_file,
    upa_channel,
    watts_to_dbm,
)

__all__ = [
    "ExperimentSpec",
    "ExperimentResult",
    "ResultRow",
    "CSV_COLUMNS",
    "PRESETS",
    "WORKERS_ENV",
    "run_experiment",
    "run_scheme",
    "solve_once",
    "point_configs",
    "solver_from_mapping",
    "TERMINAL_STATUSES",
]

CSV_COLUMNS = ("sweep_value", "scheme", "seed", "power_w", "power_dbm", "iterations",
               "wall_ms", "status", "channel_hash")
SWEEP_AXES = ("gamma_db", "area_scale", "step_d")
TERMINAL_STATUSES = ("optimal", "feasible", "infeasible", "max-iterations")
WORKERS_ENV = "MAGBD_WORKERS"

PRESETS = {
    # small enough for exhaustive certification in seconds (N = 9)
    "desk": ScenarioConfig(M=2, K=2, area_scale_l=1.0, step_d_m=0.03),
    "full": ScenarioConfig(),
}


@dataclasses.dataclass(frozen=True)
class ResultRow:
    sweep_value: float
    scheme: str
    seed: int
    power_w: float
    power_dbm: float
    iterations: int
    wall_ms: float | None
    status: str
    channel_hash: str

    def __post_init__(self):
        if math.isfinite(self.power_w) and self.power_w > 0:
            assert abs(self.power_dbm - float(watts_to_dbm(self.power_w))) <= 1e-9

    def as_csv(self) -> list:
        def num(v):
            return "" if v is None else ("inf" if v == math.inf else repr(float(v)))
        return [repr(float(self.sweep_value)), self.scheme, str(self.seed), num(self.power_w),
                num(self.power_dbm), str(self.iterations), num(self.wall_ms), self.status,
                self.channel_hash]


@dataclasses.dataclass(frozen=True)
class ExperimentSpec:
    """A sweep: one axis, its values, the schemes and the number of trials.

    ``axis`` is ``gamma_db`` (SINR target in dB for all users),
    ``area_scale`` (side length in wavelengths) or ``step_d`` (grid step in
    meters). Wall times are left out of the CSV unless
    ``record_wall_time`` is set, which keeps repeated runs byte-identical.
    """

    scenario: ScenarioConfig = PRESETS["desk"]
    solver: SolverConfig = SolverConfig()
    schemes: tuple = ("gbd",)
    axis: str = "gamma_db"
    values: tuple = (10.0,)
    trials: int = 50
    base_seed: int = 0
    csv_path: str | None = None
    json_path: str | None = None
    workers: int | None = None
    record_wall_time: bool = False
    ao_merit: str = "sinr-slack"

    def __post_init__(self):
        object.__setattr__(self, "schemes", tuple(self.schemes))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.axis not in SWEEP_AXES:
            raise ValueError(f"unknown sweep axis {self.axis!r}; expected one of {SWEEP_AXES}")
        if not self.values or any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("sweep values must be strictly increasing")
        unknown = set(self.schemes) - set(SCHEMES)
        if unknown:
            raise ValueError(f"unknown schemes {sorted(unknown)}")

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentSpec":
        data = dict(data)
        preset = data.pop("preset", "desk")
        scenario = PRESETS[preset]
        if "scenario" in data:
            scenario = ScenarioConfig.from_mapping({**scenario.to_dict(), **data.pop("scenario")})
        solver = solver_from_mapping(data.pop("solver", {}))
        sweep = data.pop("sweep", None)
        if sweep is not None:
            data["axis"] = sweep["axis"]
            data["values"] = sweep["values"]
        return cls(scenario=scenario, solver=solver, **data)

    @classmethod
    def from_file(cls, path) -> "ExperimentSpec":
        return cls.from_mapping(load_config_file(path))

    def to_dict(self) -> dict:
        solver = dataclasses.asdict(self.solver)
        return {
            "scenario": self.scenario.to_dict(),
            "solver": solver,
            "schemes": list(self.schemes),
            "axis": self.axis,
            "values": list(self.values),
            "trials": self.trials,
            "base_seed": self.base_seed,
            "ao_merit": self.ao_merit,
        }


@dataclasses.dataclass
class ExperimentResult:
    rows: list
    summary: dict
    csv_text: str

    @property
    def all_terminal(self) -> bool:
        return all(r.status in TERMINAL_STATUSES for r in self.rows)


def solver_from_mapping(data: dict) -> SolverConfig:
    data = dict(data)
    if isinstance(data.get("tolerances"), dict):
        data["tolerances"] = Tolerances(**data["tolerances"])
    return SolverConfig(**data)


def point_configs(spec: ExperimentSpec, value: float) -> tuple[ScenarioConfig, SolverConfig]:
    """Scenario and solver settings at one sweep value."""
    scenario, solver = spec.scenario, spec.solver
    if spec.axis == "gamma_db":
        solver = solver.replace(gamma_db=value)
    elif spec.axis == "area_scale":
        scenario = scenario.replace(area_scale_l=value)
    else:
        scenario = scenario.replace(step_d_m=value)
    # the distance constraint is a scenario property; keep the solver in sync
    return scenario, solver.replace(dmin_m=scenario.dmin_m)


def _placement_rng(seed: int) -> np.random.Generator:
    # independent of the channel stream, shared by fixed-random and AO
    return np.random.default_rng([seed, 1])


def run_scheme(scheme: str, scenario: ScenarioConfig, solver: SolverConfig,
               seed: int, ao_merit: str = "sinr-slack") -> tuple[SchemeResult, dict]:
    """Run one scheme on the channel drawn with ``seed``.

    Returns the result and a context dict with the grid, channel and (for
    GBD) the full driver result.
    """
    grid = scenario.grid()
    paths = scenario.paths(seed)
    channel = channel_matrix(paths, grid, scenario.M, scenario.lambda_m, scenario.noise_dbm)
    D = distance_matrix(grid)
    gamma = solver.gamma(scenario.K)
    ctx = {"grid": grid, "channel": channel, "paths": paths, "gamma": gamma}
    t0 = time.perf_counter()
    if scheme == "gbd":
        res = run(channel, D, solver)
        ctx["gbd"] = res
        out = SchemeResult("gbd", res.placement is not None, res.power,
                           None if res.placement is None else res.placement.positions,
                           time.perf_counter() - t0, res.iterations, res.W, res.sinr,
                           info={"status": res.status, "UB": res.UB, "LB": res.LB})
    elif scheme == "oracle":
        out = oracle_exhaustive(channel, D, scenario.dmin_m, gamma)
    elif scheme == "fixed-random":
        out = baseline_fixed_random(channel, D, scenario.dmin_m, gamma, _placement_rng(seed))
    elif scheme == "antenna-selection":
        H = upa_channel(paths, grid, scenario.M, scenario.lambda_m)
        out = baseline_antenna_selection(H, scenario.M, gamma, channel.noise)
    elif scheme == "ao-bcd":
        # AO refines the trial's random placement, so it never does worse
        # than the fixed-random scheme on the same draw
        start = Placement(random_placement(D, scenario.dmin_m, scenario.M,
                                           _placement_rng(seed)), grid.N)
        out = baseline_ao_bcd(channel, D, scenario.dmin_m, gamma, start,
                              delta_w=solver.delta_w, merit=ao_merit)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return out, ctx


def _status(result: SchemeResult) -> str:
    if result.scheme == "gbd":
        return result.info["status"]
    return result.status


def _row(value, scheme, seed, result: SchemeResult | None, channel_hash, error=None,
         wall=True) -> ResultRow:
    if result is None:
        return ResultRow(value, scheme, seed, math.inf, math.inf, 0, None,
                         f"error:{error}", channel_hash)
    p = result.power_w
    dbm = float(watts_to_dbm(p)) if math.isfinite(p) and p > 0 else math.inf
    return ResultRow(value, scheme, seed, p, dbm, result.iterations,
                     result.wall_s * 1e3 if wall else None, _status(result), channel_hash)


def _trial(task) -> list:
    spec, value, seed = task
    scenario, solver = point_configs(spec, value)
    channel_hash = scenario.channel(seed).digest()
    rows = []
    for scheme in spec.schemes:
        try:
            result, ctx = run_scheme(scheme, scenario, solver, seed, spec.ao_merit)
            assert ctx["channel"].digest() == channel_hash, "schemes saw different channels"
            rows.append(_row(value, scheme, seed, result, channel_hash,
                             wall=spec.record_wall_time))
        except (ConicSolverError, ValueError, AssertionError, RuntimeError) as exc:
            rows.append(_row(value, scheme, seed, None, channel_hash,
                             error=type(exc).__name__))
    return rows


def _workers(spec: ExperimentSpec) -> int:
    if spec.workers is not None:
        return max(1, int(spec.workers))
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


def _summary(spec: ExperimentSpec, rows: list) -> dict:
    points = []
    for value in spec.values:
        for scheme in spec.schemes:
            sel = [r for r in rows if r.sweep_value == value and r.scheme == scheme]
            ok = np.array([r.power_w for r in sel if math.isfinite(r.power_w)])
            entry = {"sweep_value": value, "scheme": scheme, "trials": len(sel),
                     "feasible": int(ok.size)}
            if ok.size:
                entry["mean_power_w"] = float(ok.mean())
                entry["mean_power_dbm"] = float(watts_to_dbm(ok.mean()))
                entry["stderr_power_w"] = (float(ok.std(ddof=1) / np.sqrt(ok.size))
                                           if ok.size > 1 else 0.0)
            points.append(entry)
    return {"spec": spec.to_dict(), "points": points}


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """Run every (sweep value, trial) and collect one row per scheme.

    Rows come out ordered by sweep value, then scheme (spec order), then
    trial seed, however many workers are used. Failures are
    recorded in the row status and do not stop the run.
    """
    tasks = [(spec, v, spec.base_seed + t) for v in spec.values for t in range(spec.trials)]
    workers = _workers(spec)
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(workers) as pool:
            chunks = list(pool.map(_trial, tasks))
    else:
        chunks = [_trial(t) for t in tasks]
    order = {s: i for i, s in enumerate(spec.schemes)}
    rows = sorted((r for chunk in chunks for r in chunk),
                  key=lambda r: (spec.values.index(r.sweep_value), order[r.scheme], r.seed))

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow(r.as_csv())
    text = buf.getvalue()
    summary = _summary(spec, rows)
    if spec.csv_path:
        with open(spec.csv_path, "w", newline="") as fh:
            fh.write(text)
    if spec.json_path:
        with open(spec.json_path, "w") as fh:
            json.dump(summary, fh, indent=2, default=str)
    return ExperimentResult(rows, summary, text)


def _cplx(a):
    return None if a is None else {"re": np.real(a).tolist(), "im": np.imag(a).tolist()}


def solve_once(scenario: ScenarioConfig, solver: SolverConfig, scheme: str,
               seed: int, ao_merit: str = "sinr-slack") -> tuple[SchemeResult, dict]:
    """Solve one instance and return the result with a JSON-ready dump."""
    solver = solver.replace(dmin_m=scenario.dmin_m)
    result, ctx = run_scheme(scheme, scenario, solver, seed, ao_merit)
    grid = ctx["grid"]
    dump = {
        "scheme": scheme,
        "seed": seed,
        "status": _status(result),
        "power_w": result.power_w,
        "power_dbm": float(watts_to_dbm(result.power_w)) if result.feasible else None,
        "iterations": result.iterations,
        "wall_s": result.wall_s,
        "gamma_linear": ctx["gamma"].tolist(),
        "sinr": None if result.sinr is None else np.asarray(result.sinr).tolist(),
        "W": _cplx(result.W),
        "channel_hash": ctx["channel"].digest(),
        "scenario": scenario.to_dict(),
    }
    if result.placement is not None:
        dump["placement"] = list(result.placement)
        if scheme != "antenna-selection":
            dump["coordinates_m"] = grid.positions[list(result.placement)].tolist()
    if "gbd" in ctx:
        g = ctx["gbd"]
        dump["certificate"] = {"UB": g.UB, "LB": g.LB, "iterations": g.iterations}
        dump["trace"] = [json.loads(r.to_json()) for r in g.trace]
    return result, dump
