"""Benders master problem over discrete antenna placements.

The master minimizes the epigraph variable ``eta`` over one-hot placements
that respect the pairwise minimum distance, subject to the accumulated
optimality cuts (``eta >= cut(B)``) and feasibility cuts (``cut(B) <= 0``).
Every cut is separable across antennas, so a depth-first branch-and-bound
that assigns one antenna at a time with per-antenna minimum bounds solves it
exactly without an LP relaxation.
"""

from __future__ import annotations

import dataclasses
import io
import itertools
import math
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DIST_TOL",
    "CutRecord",
    "MasterSolution",
    "MasterInfeasible",
    "Placement",
    "evaluate_cut",
    "expand_glover",
    "glover_feasible",
    "solve_master",
    "solve_master_enumerate",
    "export_milp",
    "solve_exported_milp",
    "feasible_placements",
    "pair_compatible",
]

# Distances are lattice multiples; the comparison with D_min allows 1 nm.
DIST_TOL = 1e-9


class MasterInfeasible(RuntimeError):
    """Feasibility cuts (or the distance constraint) exclude every placement."""


@dataclasses.dataclass(frozen=True)
class Placement:
    """One candidate position index per movable element (0-based)."""

    positions: tuple
    N: int

    def __post_init__(self):
        object.__setattr__(self, "positions", tuple(int(n) for n in self.positions))
        if any(not 0 <= n < self.N for n in self.positions):
            raise ValueError(f"position index out of range in {self.positions}")

    @property
    def M(self) -> int:
        return len(self.positions)

    def b(self) -> np.ndarray:
        """``M x N`` one-hot selection vectors."""
        out = np.zeros((self.M, self.N))
        out[np.arange(self.M), self.positions] = 1.0
        return out

    def B(self) -> np.ndarray:
        """Block-diagonal ``MN x M`` selection matrix."""
        out = np.zeros((self.M * self.N, self.M))
        for m, n in enumerate(self.positions):
            out[m * self.N + n, m] = 1.0
        return out

    def y(self) -> dict:
        """Glover products ``y[m, m'][i, j] = b_m[i] b_m'[j]`` for ``m < m'``."""
        b = self.b()
        return {(m, mp): np.outer(b[m], b[mp])
                for m, mp in itertools.combinations(range(self.M), 2)}

    def is_feasible(self, D: np.ndarray, dmin: float) -> bool:
        return all(a != c and D[a, c] >= dmin - DIST_TOL
                   for a, c in itertools.combinations(self.positions, 2))


def pair_compatible(D: np.ndarray, dmin: float) -> np.ndarray:
    """Boolean ``N x N`` matrix of distinct position pairs at least ``dmin`` apart.

    Two elements never share a position, even when ``dmin`` is zero.
    """
    ok = D >= dmin - DIST_TOL
    np.fill_diagonal(ok, False)
    return ok


def feasible_placements(D: np.ndarray, dmin: float, M: int,
                        increasing: bool = False) -> Iterable[tuple]:
    """Lexicographic enumeration of all distance-feasible ordered placements."""
    ok = pair_compatible(D, dmin)
    N = D.shape[0]

    def rec(prefix):
        if len(prefix) == M:
            yield tuple(prefix)
            return
        start = prefix[-1] + 1 if (increasing and prefix) else 0
        for n in range(start, N):
            if all(ok[p, n] for p in prefix):
                prefix.append(n)
                yield from rec(prefix)
                prefix.pop()

    yield from rec([])


@dataclasses.dataclass(frozen=True)
class CutRecord:
    """Benders cut ``constant + sum_m coeffs[m, n_m]``.

    An optimality cut bounds ``eta`` from below; a feasibility cut must be
    nonpositive at every admissible placement.
    """

    kind: str  # "optimality" | "feasibility"
    constant: float
    coeffs: np.ndarray  # (M, N)
    iteration: int
    generator: tuple
    generator_value: float  # p*_t (optimality) or sum(lambda*) (feasibility)

    def __post_init__(self):
        if self.kind not in ("optimality", "feasibility"):
            raise ValueError(f"unknown cut kind {self.kind!r}")
        value = evaluate_cut(self, self.generator)
        if not math.isclose(value, self.generator_value, rel_tol=1e-9,
                            abs_tol=1e-12 * (1 + abs(self.generator_value)
                                              + abs(self.constant))):
            raise AssertionError("cut is not tight at its generating placement")
        if self.kind == "feasibility" and not value > 0:
            raise AssertionError("feasibility cut does not exclude its generator")


def evaluate_cut(cut: CutRecord, placement) -> float:
    """Value of the cut at a placement (tuple of indices or :class:`Placement`)."""
    pos = placement.positions if isinstance(placement, Placement) else placement
    coeffs = cut.coeffs
    return float(cut.constant + sum(coeffs[m, n] for m, n in enumerate(pos)))


@dataclasses.dataclass(frozen=True)
class MasterSolution:
    placement: tuple
    eta: float
    nodes: int  # complete placements evaluated
    proven_optimal: bool
    tree_nodes: int = 0  # all search-tree nodes, partial assignments included


def solve_master(D: np.ndarray, dmin: float, cuts: Sequence[CutRecord], M: int,
                 symmetry_breaking: bool = False, feas_tol: float = 0.0,
                 exclude: Iterable[tuple] = ()) -> MasterSolution:
    """Exact minimization of ``max`` over optimality cuts, subject to the rest.

    Depth-first over antennas in fixed order. A node's bound is the maximum
    over optimality cuts of the cut constant plus the assigned coefficients
    plus, for each unassigned antenna, the smallest coefficient over its
    still-compatible positions. A node is dropped when that bound cannot beat
    the incumbent or when some feasibility cut's analogous minimum exceeds
    ``feas_tol``. Ties go to the lexicographically smallest placement.

    Parameters
    ----------
    D : (N, N) distance matrix.
    dmin : minimum pairwise distance.
    cuts : accumulated :class:`CutRecord` pool.
    M : number of movable elements.
    symmetry_breaking : restrict to strictly increasing position indices.
    exclude : placements that must not be returned (optional).
    """
    N = D.shape[0]
    ok = pair_compatible(D, dmin)
    opt = [c for c in cuts if c.kind == "optimality"]
    feas = [c for c in cuts if c.kind == "feasibility"]
    Lo = np.array([c.coeffs for c in opt]).reshape(len(opt), M, N)
    co = np.array([c.constant for c in opt])
    Lf = np.array([c.coeffs for c in feas]).reshape(len(feas), M, N)
    cf = np.array([c.constant for c in feas])
    excluded = {tuple(p) for p in exclude}

    best = [math.inf, None]
    nodes = leaves = 0

    # Without optimality cuts eta is unbounded below; the driver only calls
    # in that state to obtain a feasible point, so score all placements 0.
    no_opt = len(opt) == 0

    def bound_terms(m_next, allowed):
        # per-cut minimum over each unassigned antenna's allowed positions
        lo_o = np.zeros(len(opt))
        lo_f = np.zeros(len(feas))
        if not allowed.any():
            return None
        for m in range(m_next, M):
            if len(opt):
                lo_o += Lo[:, m, allowed].min(axis=1)
            if len(feas):
                lo_f += Lf[:, m, allowed].min(axis=1)
        return lo_o, lo_f

    def rec(prefix, acc_o, acc_f, allowed):
        nonlocal nodes, leaves
        nodes += 1
        m = len(prefix)
        if m == M:
            leaves += 1
            if tuple(prefix) in excluded:
                return
            if len(feas) and np.any(cf + acc_f > feas_tol):
                return
            val = 0.0 if no_opt else float(np.max(co + acc_o))
            if val < best[0]:
                best[0], best[1] = val, tuple(prefix)
            return
        terms = bound_terms(m, allowed)
        if terms is None:
            return
        lo_o, lo_f = terms
        if len(feas) and np.any(cf + acc_f + lo_f > feas_tol):
            return
        if not no_opt:
            lb = float(np.max(co + acc_o + lo_o))
            if lb >= best[0]:
                return
        elif best[1] is not None:
            return
        # visit positions in increasing index order (lexicographic ties)
        for n in np.flatnonzero(allowed):
            if symmetry_breaking and prefix and n <= prefix[-1]:
                continue
            child = allowed & ok[n]
            child[n] = False
            if symmetry_breaking:
                child[: n + 1] = False
            prefix.append(int(n))
            rec(prefix,
                acc_o + (Lo[:, m, n] if len(opt) else 0.0),
                acc_f + (Lf[:, m, n] if len(feas) else 0.0),
                child)
            prefix.pop()

    rec([], np.zeros(len(opt)), np.zeros(len(feas)), np.ones(N, dtype=bool))
    if best[1] is None:
        raise MasterInfeasible("no placement satisfies the distance constraint and "
                               "all feasibility cuts")
    eta = -math.inf if no_opt else best[0]
    return MasterSolution(best[1], eta, leaves, True, nodes)


def solve_master_enumerate(D: np.ndarray, dmin: float, cuts: Sequence[CutRecord], M: int,
                           symmetry_breaking: bool = False,
                           feas_tol: float = 0.0) -> MasterSolution:
    """Brute-force reference for :func:`solve_master`."""
    best_val, best_p, count = math.inf, None, 0
    for p in feasible_placements(D, dmin, M, increasing=symmetry_breaking):
        count += 1
        if any(evaluate_cut(c, p) > feas_tol for c in cuts if c.kind == "feasibility"):
            continue
        vals = [evaluate_cut(c, p) for c in cuts if c.kind == "optimality"]
        val = max(vals) if vals else 0.0
        if val < best_val:
            best_val, best_p = val, p
    if best_p is None:
        raise MasterInfeasible("no admissible placement")
    return MasterSolution(best_p, best_val, count, True, count)


# ---------------------------------------------------------------------------
# Glover linearization of the distance constraint
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class GloverSystem:
    """Materialized linear constraints over (b, y) for all pairs ``m < m'``.

    Rows are kept per family so that callers can evaluate residuals.
    """

    M: int
    N: int
    D: np.ndarray
    dmin: float

    @property
    def pairs(self) -> list:
        return list(itertools.combinations(range(self.M), 2))

    @property
    def n_y(self) -> int:
        return len(self.pairs) * self.N * self.N

    def residuals(self, b: np.ndarray, y: dict) -> dict:
        """Constraint values, each required to be ``<= 0``."""
        out = {"C4": [], "C5a": [], "C5b": [], "C5c": []}
        for m in range(self.M):
            out["C4"].append(abs(b[m].sum() - 1.0))
        for (m, mp) in self.pairs:
            ymm = y[(m, mp)]
            out["C5a"].append(self.dmin - float(np.sum(self.D * ymm)) - DIST_TOL)
            out["C5b"].append(float(np.max(ymm - b[m][:, None])))
            out["C5b"].append(float(np.max(ymm - b[mp][None, :])))
            out["C5c"].append(float(np.max(b[m][:, None] + b[mp][None, :] - 1.0 - ymm)))
        return {k: np.asarray(v) for k, v in out.items()}

    def implied_y(self, b: np.ndarray) -> dict | None:
        """The unique binary ``y`` meeting C5b/C5c for binary ``b`` (outer products)."""
        y = {}
        for (m, mp) in self.pairs:
            lo = np.maximum(0.0, b[m][:, None] + b[mp][None, :] - 1.0)
            hi = np.minimum(b[m][:, None], b[mp][None, :])
            if np.any(lo > hi):
                return None
            # binary y in [lo, hi] with lo, hi in {0, 1}: forced whenever lo == hi
            assert np.array_equal(lo, hi)
            y[(m, mp)] = lo
        return y

    def feasible(self, b: np.ndarray) -> bool:
        """Whether some binary ``y`` satisfies C4, C5a-C5c for this ``b``."""
        y = self.implied_y(b)
        if y is None:
            return False
        res = self.residuals(b, y)
        return all(np.all(v <= 1e-12) for v in res.values())


def expand_glover(D: np.ndarray, dmin: float, M: int) -> GloverSystem:
    """Linear reformulation of ``b_m^T D b_m' >= dmin`` with auxiliary binaries.

    For each pair ``m < m'`` and every ``(i, j)``::

        sum_ij D_ij y_ij >= dmin                  (C5a)
        y_ij <= b_m[i],  y_ij <= b_m'[j]          (C5b)
        y_ij >= b_m[i] + b_m'[j] - 1              (C5c)
    """
    D = np.asarray(D, dtype=float)
    return GloverSystem(M, D.shape[0], D, float(dmin))


def glover_feasible(D: np.ndarray, dmin: float, i: int, j: int) -> bool:
    """Materialized two-antenna check for one-hot ``b_1 = e_i``, ``b_2 = e_j``."""
    N = D.shape[0]
    b = np.zeros((2, N))
    b[0, i] = b[1, j] = 1.0
    return expand_glover(D, dmin, 2).feasible(b)


# ---------------------------------------------------------------------------
# Reference MILP export (CPLEX LP text format)
# ---------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def export_milp(D: np.ndarray, dmin: float, cuts: Sequence[CutRecord], M: int) -> str:
    """Write the master as a MILP with materialized Glover variables.

    Variables ``b_m_n`` and ``y_m_mp_i_j`` are binary and ``eta`` is free.
    The output uses the LP file format understood by common MILP solvers.
    """
    D = np.asarray(D, dtype=float)
    N = D.shape[0]
    pairs = list(itertools.combinations(range(M), 2))
    out = io.StringIO()
    out.write("\\ Benders master with Glover-linearized distance constraints\n")
    out.write("Minimize\n obj: eta\nSubject To\n")
    r = 0

    def row(terms, sense, rhs):
        nonlocal r
        body = " ".join(f"{'+' if c >= 0 else '-'} {_fmt(abs(c))} {v}" for v, c in terms)
        out.write(f" r{r}: {body} {sense} {_fmt(rhs)}\n")
        r += 1

    for m in range(M):
        row([(f"b_{m}_{n}", 1.0) for n in range(N)], "=", 1.0)
    for (m, mp) in pairs:
        terms = [(f"y_{m}_{mp}_{i}_{j}", D[i, j]) for i in range(N) for j in range(N)
                 if D[i, j] != 0.0]
        row(terms, ">=", dmin - DIST_TOL)
        for i in range(N):
            for j in range(N):
                y = f"y_{m}_{mp}_{i}_{j}"
                row([(y, 1.0), (f"b_{m}_{i}", -1.0)], "<=", 0.0)
                row([(y, 1.0), (f"b_{mp}_{j}", -1.0)], "<=", 0.0)
                row([(y, 1.0), (f"b_{m}_{i}", -1.0), (f"b_{mp}_{j}", -1.0)], ">=", -1.0)
    for c in cuts:
        terms = [(f"b_{m}_{n}", c.coeffs[m, n]) for m in range(M) for n in range(N)
                 if c.coeffs[m, n] != 0.0]
        if c.kind == "optimality":
            row([("eta", 1.0)] + [(v, -a) for v, a in terms], ">=", c.constant)
        else:
            row(terms, "<=", -c.constant)
    out.write("Bounds\n eta free\nBinaries\n")
    for m in range(M):
        out.write(" " + " ".join(f"b_{m}_{n}" for n in range(N)) + "\n")
    for (m, mp) in pairs:
        for i in range(N):
            out.write(" " + " ".join(f"y_{m}_{mp}_{i}_{j}" for j in range(N)) + "\n")
    out.write("End\n")
    return out.getvalue()


def parse_lp(text: str) -> dict:
    """Parse the subset of the LP format written by :func:`export_milp`."""
    rows, binaries = [], []
    section = None
    for line in text.splitlines():
        s = line.strip()
        if not s or s.startswith("\\"):
            continue
        key = s.lower()
        if key in ("minimize", "subject to", "bounds", "binaries", "end"):
            section = key
            continue
        if section == "subject to":
            _, body = s.split(":", 1)
            for sense in (">=", "<=", "="):
                if sense in body:
                    lhs, rhs = body.split(sense)
                    break
            toks = lhs.split()
            terms = {}
            for k in range(0, len(toks), 3):
                sign = 1.0 if toks[k] == "+" else -1.0
                terms[toks[k + 2]] = terms.get(toks[k + 2], 0.0) + sign * float(toks[k + 1])
            rows.append((terms, sense, float(rhs)))
        elif section == "binaries":
            binaries.extend(s.split())
    return {"rows": rows, "binaries": binaries}


def solve_exported_milp(text: str, M: int, N: int) -> tuple[float, tuple]:
    """Solve an exported master by enumerating one-hot ``b`` assignments.

    ``y`` is set from C5b/C5c and every row of the file is checked, so the
    result depends only on the exported text. ``eta`` is the smallest value
    satisfying all rows that contain it.
    """
    lp = parse_lp(text)
    best = (math.inf, None)
    for pos in itertools.product(range(N), repeat=M):
        val = {f"b_{m}_{n}": 0.0 for m in range(M) for n in range(N)}
        for m, n in enumerate(pos):
            val[f"b_{m}_{n}"] = 1.0
        for name in lp["binaries"]:
            if name.startswith("y_"):
                _, m, mp, i, j = name.split("_")
                val[name] = val[f"b_{m}_{i}"] * val[f"b_{mp}_{j}"]
        eta_lo = -math.inf
        ok = True
        for terms, sense, rhs in lp["rows"]:
            if "eta" in terms:
                a = terms["eta"]
                rest = sum(c * val[v] for v, c in terms.items() if v != "eta")
                # a * eta + rest >= rhs with a > 0
                eta_lo = max(eta_lo, (rhs - rest) / a)
                continue
            lhs = sum(c * val[v] for v, c in terms.items())
            tol = 1e-9 * (1 + abs(rhs))
            if (sense == ">=" and lhs < rhs - tol) or (sense == "<=" and lhs > rhs + tol) \
                    or (sense == "=" and abs(lhs - rhs) > tol):
                ok = False
                break
        if ok and eta_lo < best[0]:
            best = (eta_lo, pos)
    if best[1] is None:
        raise MasterInfeasible("exported MILP has no feasible assignment")
    return best
