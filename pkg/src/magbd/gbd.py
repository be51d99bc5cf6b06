"""Generalized Benders decomposition over antenna placements.

Each iteration solves the fixed-placement subproblem at the current master
solution. A feasible subproblem tightens the upper bound and adds an
optimality cut; an infeasible one triggers the feasibility check and adds a
feasibility cut. The master then returns the next placement together with
a lower bound, and the loop stops once ``UB - LB <= delta``.
"""

from __future__ import annotations

import dataclasses
import json
import math
import sys
import time
from typing import Sequence

import numpy as np

from .conic import Tolerances
from .master import (
    CutRecord,
    DIST_TOL,
    MasterInfeasible,
    Placement,
    pair_compatible,
    solve_master,
)
from .primal import (
    PrimalOutcome,
    assemble_feasibility,
    assemble_primal,
    make_feasibility_cut,
    make_optimality_cut,
    solve_feasibility,
    solve_primal,
)
from .scenario import ChannelSet, db_to_linear

__all__ = [
    "SolverConfig",
    "GbdState",
    "GbdResult",
    "TraceRecord",
    "NoFeasiblePlacement",
    "InstanceInfeasible",
    "initial_placement",
    "run",
]


class NoFeasiblePlacement(ValueError):
    """The grid cannot hold ``M`` elements at the minimum spacing."""


class InstanceInfeasible(RuntimeError):
    """Every placement is excluded by feasibility cuts."""


@dataclasses.dataclass(frozen=True)
class SolverConfig:
    """Settings of one decomposition run.

    ``gamma_db`` is a scalar or one value per user; ``gamma`` gives the
    linear targets. ``power_cap_w`` bounds the feasibility check while no
    feasible placement is known (``None`` uses the normalized default);
    afterwards the incumbent power is used.
    """

    delta_w: float = 1e-6
    max_iter: int = 500
    dmin_m: float = 0.015
    gamma_db: float | tuple = 10.0
    init_strategy: str = "corner-greedy"
    init_seed: int = 0
    symmetry_breaking: bool = False
    tolerances: Tolerances = Tolerances()
    cut_rule: str = "schur"
    power_cap_w: float | None = None
    verbose: bool = False

    def __post_init__(self):
        if not self.delta_w >= 0:
            raise ValueError("delta must be nonnegative")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.dmin_m < 0:
            raise ValueError("D_min must be nonnegative")
        if self.cut_rule not in ("schur", "lagrangian"):
            raise ValueError(f"unknown cut rule {self.cut_rule!r}")
        if isinstance(self.gamma_db, (list, np.ndarray)):
            object.__setattr__(self, "gamma_db", tuple(float(g) for g in self.gamma_db))

    def gamma(self, K: int) -> np.ndarray:
        g = np.atleast_1d(np.asarray(self.gamma_db, dtype=float))
        if g.size not in (1, K):
            raise ValueError(f"{g.size} SINR targets for {K} users")
        return np.broadcast_to(db_to_linear(g), (K,)).copy()

    def replace(self, **changes) -> "SolverConfig":
        return dataclasses.replace(self, **changes)


@dataclasses.dataclass(frozen=True)
class TraceRecord:
    iteration: int
    UB: float
    LB: float
    branch: str  # "feasible" | "infeasible"
    placement: tuple
    value: float  # subproblem power (watts) or total violation
    nodes: int

    def to_json(self) -> str:
        d = dataclasses.asdict(self)
        d["placement"] = list(self.placement)
        for key in ("UB", "LB", "value"):
            if not math.isfinite(d[key]):
                d[key] = str(d[key])
        return json.dumps(d)


@dataclasses.dataclass
class GbdState:
    """Bounds, visited placements and cut pool of a run in progress."""

    iteration: int = 0
    UB: float = math.inf
    LB: float = -math.inf
    feasible_iters: list = dataclasses.field(default_factory=list)
    infeasible_iters: list = dataclasses.field(default_factory=list)
    cuts: list = dataclasses.field(default_factory=list)
    incumbent: PrimalOutcome | None = None
    visited: set = dataclasses.field(default_factory=set)
    trace: list = dataclasses.field(default_factory=list)

    def record(self, rec: TraceRecord) -> None:
        if self.trace:
            prev = self.trace[-1]
            assert rec.UB <= prev.UB, "upper bound increased"
            assert rec.LB >= prev.LB, "lower bound decreased"
        assert rec.LB <= rec.UB + 1e-6 * max(1.0, abs(rec.UB) if math.isfinite(rec.UB) else 1.0), \
            "lower bound above upper bound"
        self.trace.append(rec)


@dataclasses.dataclass
class GbdResult:
    status: str  # "optimal" | "max-iterations" | "infeasible"
    placement: Placement | None
    W: np.ndarray | None
    power: float
    sinr: np.ndarray | None
    UB: float
    LB: float
    iterations: int
    trace: list
    cuts: list
    wall_s: float = 0.0

    @property
    def certificate(self) -> tuple:
        return (self.UB, self.LB, self.iterations)

    @property
    def converged(self) -> bool:
        return self.status == "optimal"


def initial_placement(D: np.ndarray, dmin: float, M: int, strategy: str = "corner-greedy",
                      seed: int = 0, increasing: bool = False) -> Placement:
    """A distance-feasible starting placement.

    ``corner-greedy`` starts from position 0 (a corner) and repeatedly adds
    the position farthest from those already chosen (lowest index on ties),
    which packs the corners of a square grid first. ``random`` draws
    positions uniformly with the given seed, rejecting incompatible ones.
    """
    N = D.shape[0]
    ok = pair_compatible(D, dmin)
    if strategy == "corner-greedy":
        chosen = [0]
        while len(chosen) < M:
            mind = D[:, chosen].min(axis=1)
            mind[chosen] = -np.inf
            n = int(np.argmax(mind))
            if not mind[n] >= dmin - DIST_TOL:
                raise NoFeasiblePlacement(
                    f"no feasible placement exists: cannot place {M} elements "
                    f"{dmin} m apart on this grid")
            chosen.append(n)
    elif strategy == "random":
        rng = np.random.default_rng(seed)
        chosen = None
        for _ in range(1000):
            pick = []
            for n in rng.permutation(N):
                if all(ok[n, p] and n != p for p in pick):
                    pick.append(int(n))
                    if len(pick) == M:
                        break
            if len(pick) == M:
                chosen = pick
                break
        if chosen is None:
            raise NoFeasiblePlacement("no feasible placement exists (random packing failed)")
    else:
        raise ValueError(f"unknown initial-placement strategy {strategy!r}")
    if increasing:
        chosen = sorted(chosen)
    return Placement(tuple(chosen), N)


def _emit(rec: TraceRecord, stream) -> None:
    stream.write(rec.to_json() + "\n")
    stream.flush()


def run(channel: ChannelSet, D: np.ndarray, config: SolverConfig = SolverConfig(),
        start: Placement | None = None, trace_stream=None) -> GbdResult:
    """Solve the joint placement and beamforming problem to global optimality.

    Parameters
    ----------
    channel : candidate channels (``channel.N`` positions, ``channel.M`` elements).
    D : ``N x N`` distance matrix of the candidate positions.
    config : solver settings.
    start : optional initial placement (defaults to ``config.init_strategy``).
    trace_stream : where JSON-lines trace records go when ``config.verbose``
        (defaults to stderr).

    Returns
    -------
    GbdResult
        ``status="optimal"`` when ``UB - LB <= delta``, ``"max-iterations"``
        with the current bracket otherwise, ``"infeasible"`` when the cuts
        rule out every placement before any feasible one was found.
    """
    t0 = time.perf_counter()
    M, N = channel.M, channel.N
    if D.shape != (N, N):
        raise ValueError(f"distance matrix is {D.shape}, channel has {N} positions")
    gamma = config.gamma(channel.K)
    tol = config.tolerances
    stream = trace_stream if trace_stream is not None else sys.stderr
    state = GbdState()
    B = start or initial_placement(D, config.dmin_m, M, config.init_strategy,
                                   config.init_seed, config.symmetry_breaking)
    if not B.is_feasible(D, config.dmin_m):
        raise ValueError(f"initial placement {B.positions} violates the minimum distance")
    status = "max-iterations"

    while state.iteration < config.max_iter:
        state.iteration += 1
        i = state.iteration
        if config.delta_w > 0:
            assert B.positions not in state.visited, f"master revisited {B.positions}"
        state.visited.add(B.positions)

        outcome = solve_primal(assemble_primal(channel, B, gamma), tol)
        if outcome.feasible:
            cut = make_optimality_cut(outcome, B, i, config.cut_rule)
            state.feasible_iters.append(i)
            if outcome.objective < state.UB:
                state.UB = outcome.objective
                state.incumbent = outcome
            branch, value = "feasible", outcome.objective
        else:
            cap = state.UB if math.isfinite(state.UB) else config.power_cap_w
            check = solve_feasibility(assemble_feasibility(channel, B, gamma, power_cap_w=cap),
                                      tol)
            cut = make_feasibility_cut(check, B, i, config.cut_rule)
            state.infeasible_iters.append(i)
            branch, value = "infeasible", check.objective
        state.cuts.append(cut)

        try:
            master = solve_master(D, config.dmin_m, state.cuts, M, config.symmetry_breaking)
        except MasterInfeasible:
            # nothing left to explore: the incumbent (if any) is optimal
            if math.isfinite(state.UB):
                state.LB = state.UB
                status = "optimal"
            else:
                status = "infeasible"
            rec = TraceRecord(i, state.UB, state.LB, branch, B.positions, value, 0)
            state.record(rec)
            if config.verbose:
                _emit(rec, stream)
            break

        # the master value can only grow as cuts accumulate; max() guards
        # against round-off in that comparison, and the master optimum can
        # exceed UB only through the same round-off
        state.LB = max(state.LB, min(master.eta, state.UB))
        rec = TraceRecord(i, state.UB, state.LB, branch, B.positions, value, master.nodes)
        state.record(rec)
        if config.verbose:
            _emit(rec, stream)
        if state.UB - state.LB <= config.delta_w:
            status = "optimal"
            break
        B = Placement(master.placement, N)

    if state.incumbent is None:
        return GbdResult("infeasible" if status != "max-iterations" else status, None, None,
                         math.inf, None, state.UB, state.LB, state.iteration, state.trace,
                         state.cuts, time.perf_counter() - t0)

    # re-solve at the incumbent so the reported beamformer belongs to it
    final = solve_primal(assemble_primal(channel, state.incumbent.placement, gamma), tol)
    return GbdResult(status, final.placement, final.W, final.objective, final.sinr,
                     state.UB, state.LB, state.iteration, state.trace, state.cuts,
                     time.perf_counter() - t0)
