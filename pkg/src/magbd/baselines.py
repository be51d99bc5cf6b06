"""Comparison schemes and the exhaustive-search oracle.

All schemes share the fixed-placement power minimization of
:func:`magbd.primal.solve_reduced`; they differ only in how the placement
is chosen.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
import time
import numpy as np

from .master import Placement, feasible_placements, pair_compatible
from .primal import assemble_feasibility, sinr, solve_feasibility, solve_reduced
from .scenario import ChannelSet

__all__ = [
    "SchemeResult",
    "OracleGuardError",
    "baseline_fixed_random",
    "random_placement",
    "baseline_antenna_selection",
    "baseline_ao_bcd",
    "oracle_exhaustive",
    "SCHEMES",
]

SCHEMES = ("fixed-random", "antenna-selection", "ao-bcd", "gbd", "oracle")


class OracleGuardError(ValueError):
    """The instance has too many placements for exhaustive search."""


@dataclasses.dataclass
class SchemeResult:
    scheme: str
    feasible: bool
    power_w: float  # inf when infeasible
    placement: tuple | None
    wall_s: float
    iterations: int = 0
    W: np.ndarray | None = None
    sinr: np.ndarray | None = None
    info: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.feasible and not self.power_w >= 0:
            raise ValueError("a feasible result needs a nonnegative power")

    @property
    def status(self) -> str:
        return "feasible" if self.feasible else "infeasible"


def _noise(channel: ChannelSet, noise):
    return channel.noise if noise is None else np.broadcast_to(
        np.asarray(noise, dtype=float), (channel.K,))


def _gamma(channel: ChannelSet, gamma) -> np.ndarray:
    return np.broadcast_to(np.asarray(gamma, dtype=float), (channel.K,)).copy()


def random_placement(D: np.ndarray, dmin: float, M: int, rng,
                     max_draws: int = 100000) -> tuple:
    """Uniform distance-feasible placement by rejection sampling.

    Positions are drawn without replacement and the whole draw is rejected
    until the spacing holds.
    """
    rng = np.random.default_rng(rng)
    N = D.shape[0]
    ok = pair_compatible(D, dmin)
    for _ in range(max_draws):
        pick = tuple(int(n) for n in rng.choice(N, size=M, replace=False))
        if all(ok[a, b] for a, b in itertools.combinations(pick, 2)):
            return pick
    raise ValueError("no distance-feasible placement found by rejection sampling")


def baseline_fixed_random(channel: ChannelSet, D: np.ndarray, dmin: float, gamma,
                          rng, noise=None) -> SchemeResult:
    """Power minimization at one randomly drawn distance-feasible placement.

    An infeasible SINR system at the drawn placement is reported as such;
    it is not redrawn.
    """
    t0 = time.perf_counter()
    pick = random_placement(D, dmin, channel.M, rng)
    res = solve_reduced(channel.effective(pick), _gamma(channel, gamma), _noise(channel, noise))
    return SchemeResult("fixed-random", res.feasible, res.power, pick,
                        time.perf_counter() - t0, 1, res.W, res.sinr)


def baseline_antenna_selection(H_upa: np.ndarray, M: int, gamma, noise) -> SchemeResult:
    """Best ``M``-subset of a ``2 x M`` fixed array, by exhaustive search.

    ``H_upa`` is ``K x 2M`` (columns in :func:`magbd.scenario.upa_positions`
    order). Ties go to the lexicographically smallest subset.
    """
    t0 = time.perf_counter()
    H_upa = np.asarray(H_upa, dtype=complex)
    if H_upa.shape[1] != 2 * M:
        raise ValueError(f"expected {2 * M} array elements, got {H_upa.shape[1]}")
    K = H_upa.shape[0]
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (K,))
    best = None
    count = 0
    for subset in itertools.combinations(range(2 * M), M):
        count += 1
        res = solve_reduced(H_upa[:, subset], gamma, noise)
        if res.feasible and (best is None or res.power < best[0].power):
            best = (res, subset)
    wall = time.perf_counter() - t0
    if best is None:
        return SchemeResult("antenna-selection", False, math.inf, None, wall, count,
                            info={"subsets": count})
    res, subset = best
    return SchemeResult("antenna-selection", True, res.power, subset, wall, count,
                        res.W, res.sinr, info={"subsets": count})


def baseline_ao_bcd(channel: ChannelSet, D: np.ndarray, dmin: float, gamma,
                    start: Placement, noise=None, delta_w: float = 1e-9,
                    max_outer: int = 100, merit: str = "sinr-slack") -> SchemeResult:
    """Alternate beamformer re-optimization and per-element position moves.

    Step (a) minimizes power for the current placement. Step (b) moves each
    element in turn to the compatible position with the best merit (the
    current position wins ties):

    ``merit="sinr-slack"``
        largest worst-user ratio ``SINR_k / gamma_k`` under the fixed ``W``.
        While ``W`` meets the targets it still does after the move, so the
        power of step (a) never increases.
    ``merit="power"``
        smallest minimum power with ``W`` re-optimized for the candidate
        position (coordinate descent on the objective itself).

    Stops when no element moves or the power gain is below ``delta_w``.
    """
    if merit not in ("sinr-slack", "power"):
        raise ValueError(f"unknown merit {merit!r}")
    t0 = time.perf_counter()
    gamma = _gamma(channel, gamma)
    noise = _noise(channel, noise)
    M, N = channel.M, channel.N
    ok = pair_compatible(D, dmin)
    pos = list(start.positions)
    powers = []
    best = None
    outer = 0
    for outer in range(1, max_outer + 1):
        res = solve_reduced(channel.effective(pos), gamma, noise)
        if res.feasible:
            if best is not None and res.power > best[0].power - delta_w:
                # no meaningful gain (or round-off going the wrong way)
                break
            best = (res, tuple(pos))
            powers.append(res.power)
            W = res.W
        else:
            if best is not None:
                break
            # no feasible iterate yet: steer with the least-violating beamformer
            chk = solve_feasibility(assemble_feasibility(channel, Placement(tuple(pos), N), gamma,
                                                         noise))
            W = chk.W
        moved = False
        for m in range(M):
            others = pos[:m] + pos[m + 1:]
            allowed = [n for n in range(N) if n not in others and all(ok[n, o] for o in others)]
            scores = []
            for n in allowed:
                trial = pos[:m] + [n] + pos[m + 1:]
                if merit == "power":
                    p = solve_reduced(channel.effective(trial), gamma, noise).power
                    scores.append(-p if math.isfinite(p) else -math.inf)
                else:
                    scores.append(np.min(sinr(channel.effective(trial), W, noise) / gamma))
            top = max(scores)
            current = scores[allowed.index(pos[m])]
            if top > current and (not math.isfinite(current)
                                  or top > current + 1e-12 * abs(current)):
                pos[m] = allowed[scores.index(top)]
                moved = True
        if not moved:
            break
    wall = time.perf_counter() - t0
    if best is None:
        return SchemeResult("ao-bcd", False, math.inf, tuple(pos), wall, outer)
    res, placement = best
    return SchemeResult("ao-bcd", True, res.power, placement, wall, outer, res.W, res.sinr,
                        info={"power_trace": powers})


def oracle_exhaustive(channel: ChannelSet, D: np.ndarray, dmin: float, gamma, noise=None,
                      symmetric: bool = True, guard: int = 10 ** 6) -> SchemeResult:
    """Global optimum by solving every distance-feasible placement.

    Channels are identical for every element, so the power depends only on
    the set of positions; ``symmetric=True`` visits each set once (increasing
    indices). The guard counts ordered assignments and is never silently
    truncated: exceeding it raises :class:`OracleGuardError`.
    """
    t0 = time.perf_counter()
    gamma = _gamma(channel, gamma)
    noise = _noise(channel, noise)
    ordered = 0
    for _ in feasible_placements(D, dmin, channel.M):
        ordered += 1
        if ordered > guard:
            raise OracleGuardError(f"more than {guard} feasible assignments")
    best = None
    count = 0
    for p in feasible_placements(D, dmin, channel.M, increasing=symmetric):
        count += 1
        res = solve_reduced(channel.effective(p), gamma, noise)
        if res.feasible and (best is None or res.power < best[0].power):
            best = (res, p)
    wall = time.perf_counter() - t0
    info = {"assignments": ordered, "solved": count}
    if best is None:
        return SchemeResult("oracle", False, math.inf, None, wall, count, info=info)
    res, p = best
    return SchemeResult("oracle", True, res.power, p, wall, count, res.W, res.sinr, info=info)
