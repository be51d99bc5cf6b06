"""Primal and feasibility-check subproblems for a fixed placement, and cuts.

For a fixed placement ``B`` the joint problem is convex in the continuous
variables. The coupling ``X = B W`` is written as the linear matrix
inequality

    [[U, X, B], [X^H, V, W^H], [B^H, W, I_M]] >= 0,   Tr(U) <= M,

and each SINR constraint as a second-order cone with the phase of the
useful signal fixed to the real axis.

Numerics: every subproblem is solved on a normalized copy of the data.
Each user's SINR is unchanged when its channel row and noise amplitude are
divided by the same number, so row ``k`` is divided by its RMS gain
``r_k``; then the beamformer is measured in units of ``sqrt(s)`` with
``s = max_k sigma_k^2 / r_k^2``, which puts the largest normalized noise
at 1. Transmit powers and dual bounds scale exactly by ``s``, which is
applied to all reported quantities.
"""

from __future__ import annotations

import dataclasses
import json
from typing import Sequence

import numpy as np

from .conic import (
    Affine,
    ConeKind,
    ConicProblem,
    ConicSolution,
    ConicSolverError,
    ProblemBuilder,
    SolveStatus,
    Tolerances,
    certify,
    pack_hermitian_dual,
    project_soc,
    solve,
)
from .master import CutRecord, Placement
from .scenario import ChannelSet

__all__ = [
    "PrimalOutcome",
    "ReducedResult",
    "assemble_primal",
    "assemble_feasibility",
    "solve_primal",
    "solve_feasibility",
    "solve_reduced",
    "make_optimality_cut",
    "make_feasibility_cut",
    "sinr",
    "outcome_to_json",
    "DEFAULT_CAP",
]

# Power budget of the feasibility check, in normalized units (see module doc).
DEFAULT_CAP = 1e4


def sinr(H: np.ndarray, W: np.ndarray, noise) -> np.ndarray:
    """Per-user SINR for channel ``H`` (K x M) and beamformer ``W`` (M x K)."""
    G = np.abs(H @ W) ** 2
    sig = np.diag(G)
    interf = G.sum(axis=1) - sig
    return sig / (interf + np.asarray(noise, dtype=float))


def _normalize(H: np.ndarray, noise) -> tuple[np.ndarray, np.ndarray, float]:
    """Row-normalized channel, normalized noise amplitudes and power scale."""
    noise = np.broadcast_to(np.asarray(noise, dtype=float), (H.shape[0],))
    r = np.sqrt(np.mean(np.abs(H) ** 2, axis=1))
    r = np.where(r > 0, r, 1.0)
    amp2 = noise / r ** 2
    scale = float(np.max(amp2))
    if not scale > 0:
        scale = 1.0
    return H / r[:, None], np.sqrt(amp2 / scale), scale


def _check_inputs(channel: ChannelSet, placement: Placement, gamma) -> np.ndarray:
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (channel.K,)).copy()
    if np.any(gamma <= 0):
        raise ValueError("SINR targets must be positive (linear scale)")
    if placement.M != channel.M or placement.N != channel.N:
        raise ValueError(
            f"placement is {placement.M}x{placement.N}, channel is {channel.M}x{channel.N}")
    return gamma


def _sinr_constraints(pb: ProblemBuilder, H: np.ndarray, cols, gamma, sigma, lam,
                      feasibility: bool) -> None:
    # shared by the full and the face-reduced model so that the SOC and
    # phase blocks have identical layouts (and interchangeable duals)
    n = pb.nvar
    K = len(cols)
    for k in range(K):
        row = H[k][None, :]
        useful = cols[k].lmul(row)
        head = useful.real().scale(1.0 / np.sqrt(gamma[k]))
        if feasibility:
            head = head + lam.rows([k])
        tail = [cols[j].lmul(row) for j in range(K) if j != k]
        tail.append(Affine.constant([sigma[k]], n))
        pb.soc(head, Affine.stack(tail), f"C1a-bar[{k}]" if feasibility else f"C1a[{k}]")
        pb.equal(useful.imag(), f"C1b[{k}]")


def _block_index(sizes, offsets) -> np.ndarray:
    """Row-major gather map for a Hermitian block matrix.

    ``offsets[(a, b)]`` is ``(start, row_stride, transpose)`` into the
    stacked source for block ``(a, b)``.
    """
    edges = np.concatenate([[0], np.cumsum(sizes)])
    q = edges[-1]
    idx = np.empty((q, q), dtype=int)
    for a in range(len(sizes)):
        for b in range(len(sizes)):
            start, stride, trans = offsets[(a, b)]
            ii = np.arange(sizes[a])[:, None]
            jj = np.arange(sizes[b])[None, :]
            if trans:
                ii, jj = jj, ii
            idx[edges[a]:edges[a + 1], edges[b]:edges[b + 1]] = start + ii * stride + jj
    return idx


def _build(channel: ChannelSet, placement: Placement, gamma, noise, feasibility: bool,
           power_cap_w: float | None) -> ConicProblem:
    gamma = _check_inputs(channel, placement, gamma)
    noise = channel.noise if noise is None else np.broadcast_to(
        np.asarray(noise, dtype=float), (channel.K,))
    # row norms from the base channel so every placement shares them
    _, sigma, scale = _normalize(channel.H_base, noise)
    r = np.sqrt(np.mean(np.abs(channel.H_base) ** 2, axis=1))
    H = channel.H_hat / np.where(r > 0, r, 1.0)[:, None]
    M, N, K = channel.M, channel.N, channel.K
    MN = M * N

    pb = ProblemBuilder()
    X = pb.complex("X", (MN, K))
    W = pb.complex("W", (M, K))
    U = pb.hermitian("U", MN)
    V = pb.hermitian("V", K)
    lam = pb.real("lambda", (K,)) if feasibility else None
    n = pb.nvar

    trace_V = V.rows([i * K + i for i in range(K)]).lmul(np.ones((1, K)))
    pb.minimize(lam.lmul(np.ones((1, K))) if feasibility else trace_V)
    xcols = [X.rows(np.arange(MN) * K + k) for k in range(K)]
    _sinr_constraints(pb, H, xcols, gamma, sigma, lam, feasibility)

    # C2a: [[U, X, B], [X^H, V, W^H], [B^H, W, I]]
    src = Affine.stack([
        U, X, X.conj(), V, W, W.conj(),
        Affine.constant(placement.B().ravel(), n),
        Affine.constant(np.eye(M).ravel(), n),
    ])
    o = np.cumsum([0, MN * MN, MN * K, MN * K, K * K, M * K, M * K, MN * M])
    idx = _block_index((MN, K, M), {
        (0, 0): (o[0], MN, False), (0, 1): (o[1], K, False), (0, 2): (o[6], M, False),
        (1, 0): (o[2], K, True), (1, 1): (o[3], K, False), (1, 2): (o[5], K, True),
        (2, 0): (o[6], M, True), (2, 1): (o[4], K, False), (2, 2): (o[7], M, False),
    })
    pb.psd(src.rows(idx.ravel()), MN + K + M, "C2a")

    trace_U = U.rows([i * MN + i for i in range(MN)]).lmul(np.ones((1, MN)))
    pb.less(trace_U - Affine.constant([float(M)], n), "C2b")

    cap = None
    if feasibility:
        pb.less(-lam, "C6")
        cap = DEFAULT_CAP if power_cap_w is None else power_cap_w / scale
        pb.less(trace_V - Affine.constant([cap], n), "cap")

    prob = pb.build()
    prob.meta.update(
        kind="feasibility" if feasibility else "primal",
        placement=placement,
        gamma=gamma,
        noise=np.asarray(noise, dtype=float),
        sigma=sigma,
        scale=scale,
        H_hat=channel.H_hat,
        H_norm=H,
        dims=(M, N, K),
        cap=cap,
    )
    return prob


def _build_face(prob: ConicProblem) -> ConicProblem:
    """The same problem restricted to the face ``U = B B^H``, ``X = B W``.

    On that face the large LMI reduces to ``[[V, W^H], [W, I_M]] >= 0``,
    which has interior points, unlike the original one.
    """
    meta = prob.meta
    M, N, K = meta["dims"]
    feasibility = meta["kind"] == "feasibility"
    H_eff = meta["H_norm"] @ meta["placement"].B()

    pb = ProblemBuilder()
    W = pb.complex("W", (M, K))
    V = pb.hermitian("V", K)
    lam = pb.real("lambda", (K,)) if feasibility else None
    n = pb.nvar
    trace_V = V.rows([i * K + i for i in range(K)]).lmul(np.ones((1, K)))
    pb.minimize(lam.lmul(np.ones((1, K))) if feasibility else trace_V)
    wcols = [W.rows(np.arange(M) * K + k) for k in range(K)]
    _sinr_constraints(pb, H_eff, wcols, meta["gamma"], meta["sigma"], lam, feasibility)

    src = Affine.stack([V, W, W.conj(), Affine.constant(np.eye(M).ravel(), n)])
    o = np.cumsum([0, K * K, M * K, M * K])
    idx = _block_index((K, M), {
        (0, 0): (o[0], K, False), (0, 1): (o[2], K, True),
        (1, 0): (o[1], K, False), (1, 1): (o[3], M, False),
    })
    pb.psd(src.rows(idx.ravel()), K + M, "face")
    if feasibility:
        pb.less(-lam, "C6")
        pb.less(trace_V - Affine.constant([meta["cap"]], n), "cap")
    return pb.build()


def assemble_primal(channel: ChannelSet, placement: Placement, gamma,
                    noise=None) -> ConicProblem:
    """Minimum-power problem for a fixed placement.

    The objective is ``Tr(V)``: the Schur complement of the LMI forces
    ``V >= W^H W``, so its minimum equals the minimum of ``sum ||w_k||^2``
    while keeping a bounded dual (``V`` would otherwise be free upward).
    ``gamma`` is linear; ``noise`` defaults to the channel's noise powers.
    """
    return _build(channel, placement, gamma, noise, feasibility=False, power_cap_w=None)


def assemble_feasibility(channel: ChannelSet, placement: Placement, gamma, noise=None,
                         power_cap_w: float | None = None) -> ConicProblem:
    """Feasibility check: minimize the total SINR-constraint violation.

    Same constraints as :func:`assemble_primal` with each SINR cone relaxed
    by ``lambda_k >= 0``, plus the power budget ``Tr(V) <= cap`` that keeps
    the dual informative. ``power_cap_w=None`` uses ``DEFAULT_CAP`` in
    normalized units.
    """
    return _build(channel, placement, gamma, noise, feasibility=True,
                  power_cap_w=power_cap_w)


@dataclasses.dataclass
class PrimalOutcome:
    """Result of a primal solve or a feasibility check at one placement.

    Dual quantities are multipliers of the normalized constraint system
    multiplied by the power scale, so that Lagrangian bounds are in watts.
    ``Xi`` is the Hermitian dual of the LMI (order ``MN + K + M``).
    """

    status: str  # "feasible" | "infeasible"
    placement: Placement
    objective: float  # watts; primal: min power, feasibility: sum(lambda) (unitless)
    W: np.ndarray | None = None
    X: np.ndarray | None = None
    U: np.ndarray | None = None
    V: np.ndarray | None = None
    mu: np.ndarray | None = None
    nu: np.ndarray | None = None
    Xi: np.ndarray | None = None
    xi: float | None = None
    lam: np.ndarray | None = None
    sinr: np.ndarray | None = None
    gap: float = np.nan
    iterations: int = 0
    scale: float = 1.0
    cap_dual: float | None = None
    dims: tuple = ()
    dual_objective: float = np.nan
    dual_residual: float = np.nan

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"

    @property
    def power(self) -> float:
        """``sum ||w_k||^2`` of the returned beamformer, watts."""
        return float(np.sum(np.abs(self.W) ** 2)) if self.W is not None else np.nan

    def Xi_block(self, name: str) -> np.ndarray:
        """Sub-blocks ``11, 21, 22, 31, 32, 33`` of the LMI dual."""
        M, N, K = self.dims
        MN = M * N
        cut = {"1": slice(0, MN), "2": slice(MN, MN + K), "3": slice(MN + K, MN + K + M)}
        return self.Xi[cut[name[0]], cut[name[1]]]


def _duals(sol, prob: ConicProblem, feasibility: bool) -> dict:
    M, N, K = prob.meta["dims"]
    scale = prob.meta["scale"]
    # feasibility-check values are violations, not powers: unscaled
    f = 1.0 if feasibility else scale
    tag = "C1a-bar" if feasibility else "C1a"
    mu = np.array([sol.duals[f"{tag}[{k}]"][0] for k in range(K)]) * f
    nu = np.array([sol.duals[f"C1b[{k}]"][0] for k in range(K)]) * f
    Xi = sol.hermitian_dual("C2a") * f
    xi = float(sol.duals["C2b"][0]) * f
    out = dict(mu=mu, nu=nu, Xi=Xi, xi=xi)
    if feasibility:
        out["cap_dual"] = float(sol.duals["cap"][0])
    return out


def _lift(prob: ConicProblem, face: ConicProblem, fsol, tolerances) -> ConicSolution:
    """Map a face-problem solution to a certified pair for the full model.

    The primal point is ``U = B B^H``, ``X = B W``. The LMI dual is rebuilt
    in closed form from the SINR multipliers: stationarity in ``X`` fixes
    ``Xi_12 = G / 2`` (``G`` the gradient of the SINR terms), stationarity in
    ``V`` fixes ``Xi_22 = zeta I``, and ``Xi_11 = xi I``, ``Xi_13 = -P B``,
    ``Xi_33 = B^H P B`` with ``P = xi I - Xi_12 Xi_21 / zeta`` is the
    cheapest completion that is positive semidefinite and complementary.
    """
    meta = prob.meta
    M, N, K = meta["dims"]
    MN = M * N
    feasibility = meta["kind"] == "feasibility"
    B = meta["placement"].B()
    v = fsol.values
    values = {"W": v["W"], "V": v["V"], "X": B @ v["W"], "U": B @ B.T}
    if feasibility:
        values["lambda"] = v["lambda"]
    x = prob.pack(values)

    rows = {blk.label: blk.rows for blk in prob.blocks}
    offsets = dict(zip(rows, np.cumsum([0] + list(rows.values()))[:-1]))
    z = np.zeros(sum(rows.values()))

    def put(label, val):
        z[offsets[label]:offsets[label] + rows[label]] = val

    for blk in prob.blocks:
        if blk.kind is ConeKind.SOC:
            put(blk.label, project_soc(fsol.duals[blk.label]))
        elif blk.kind is ConeKind.ZERO:
            put(blk.label, fsol.duals[blk.label])

    if feasibility:
        # any zeta > 0 with a matching cap multiplier is dual feasible; a
        # floor keeps the completion finite when the budget is slack
        zeta = max(float(fsol.duals["cap"][0]), 0.5 * max(fsol.objective, 0.0) / meta["cap"],
                   1e-12)
        put("cap", zeta)
    else:
        zeta = 1.0

    grad = prob.c + sum(blk.A.T @ z[offsets[blk.label]:offsets[blk.label] + blk.rows]
                        for blk in prob.blocks)
    info = prob.variables["X"].index
    G = grad[info[..., 0]] + 1j * grad[info[..., 1]]
    if feasibility:
        # C6 is -lambda <= 0: its multiplier absorbs the lambda gradient
        put("C6", np.maximum(grad[prob.variables["lambda"].index], 0.0))

    Xi12 = G / 2.0
    Xi21 = Xi12.conj().T
    xi = float(np.linalg.norm(Xi21, 2) ** 2) / zeta
    P = xi * np.eye(MN) - (Xi12 @ Xi21) / zeta
    P = (P + P.conj().T) / 2.0
    Xi = np.zeros((MN + K + M, MN + K + M), dtype=complex)
    Xi[:MN, :MN] = xi * np.eye(MN)
    Xi[:MN, MN:MN + K] = Xi12
    Xi[MN:MN + K, :MN] = Xi21
    Xi[MN:MN + K, MN:MN + K] = zeta * np.eye(K)
    Xi[:MN, MN + K:] = -P @ B
    Xi[MN + K:, :MN] = -(B.T @ P)
    Xi[MN + K:, MN + K:] = B.T @ P @ B
    put("C2a", pack_hermitian_dual(Xi))
    put("C2b", xi)
    return certify(prob, x, z, tolerances, fsol.raw_status, fsol.iterations)


def _solve(prob: ConicProblem, tolerances: Tolerances | None, method: str):
    if method == "face":
        face = _build_face(prob)
        # an attempt counts only if its lift certifies on the full model
        sol = solve(face, tolerances, check=lambda fsol: _lift(prob, face, fsol, tolerances))
        if sol.status is SolveStatus.INFEASIBLE:
            return sol
        if sol.status is SolveStatus.NUMERICAL_FAILURE and sol.x.size != prob.nvar:
            raise ConicSolverError(
                f"{prob.meta['kind']} solve failed at placement "
                f"{prob.meta['placement'].positions}: {sol.raw_status}, "
                f"residual={sol.primal_residual:.2e}, gap={sol.gap:.2e}")
    elif method == "direct":
        sol = solve(prob, tolerances)
    else:
        raise ValueError(f"unknown method {method!r}")
    if sol.status is SolveStatus.NUMERICAL_FAILURE and not (
            prob.meta["kind"] == "feasibility" and method == "face"):
        raise ConicSolverError(
            f"{prob.meta['kind']} solve failed at placement "
            f"{prob.meta['placement'].positions}: {sol.raw_status}, "
            f"residual={sol.primal_residual:.2e}, dual residual={sol.dual_residual:.2e}, "
            f"gap={sol.gap:.2e}")
    return sol


def solve_primal(problem: ConicProblem, tolerances: Tolerances | None = None,
                 method: str = "face") -> PrimalOutcome:
    """Solve an assembled primal problem.

    ``method="face"`` (default) solves the problem on the face of the LMI
    that contains every feasible point and lifts the result to a primal-dual
    pair of the full model, which is then checked against it.
    ``method="direct"`` hands the full model to the interior-point solver;
    it is much slower and, because the LMI has no interior, usually only
    accurate to about 1e-5.

    Returns an outcome with ``status="infeasible"`` (no duals) when the SINR
    targets cannot be met at this placement; the caller then runs the
    feasibility check. Raises :class:`ConicSolverError` on breakdown.
    """
    meta = problem.meta
    if meta["kind"] != "primal":
        raise ValueError("expected a problem from assemble_primal")
    sol = _solve(problem, tolerances, method)
    placement = meta["placement"]
    if sol.status is SolveStatus.INFEASIBLE:
        return PrimalOutcome("infeasible", placement, np.inf, scale=meta["scale"],
                             dims=meta["dims"], iterations=sol.iterations)
    scale = meta["scale"]
    v = sol.values
    amp = np.sqrt(scale)
    W = v["W"] * amp
    H_eff = meta["H_hat"] @ placement.B()
    return PrimalOutcome(
        "feasible", placement, sol.objective * scale,
        W=W, X=v["X"] * amp, U=v["U"], V=v["V"] * scale,
        sinr=sinr(H_eff, W, meta["noise"]),
        gap=sol.gap, iterations=sol.iterations, scale=scale, dims=meta["dims"],
        dual_objective=sol.dual_objective * scale,
        dual_residual=sol.dual_residual,
        **_duals(sol, problem, False),
    )


def solve_feasibility(problem: ConicProblem, tolerances: Tolerances | None = None,
                      method: str = "face") -> PrimalOutcome:
    """Solve an assembled feasibility-check problem (always feasible).

    With the face method the returned dual is always exactly feasible;
    when the power budget is slack at the optimum the dual bound can sit
    below the optimal violation, which shows up as a larger ``gap``.
    """
    meta = problem.meta
    if meta["kind"] != "feasibility":
        raise ValueError("expected a problem from assemble_feasibility")
    sol = _solve(problem, tolerances, method)
    if sol.status is SolveStatus.INFEASIBLE:
        raise ConicSolverError(f"feasibility check returned {sol.raw_status}")
    if sol.status is SolveStatus.NUMERICAL_FAILURE:
        sol.values = problem.unpack(sol.x)
    v = sol.values
    amp = np.sqrt(meta["scale"])
    placement = meta["placement"]
    lam = np.maximum(v["lambda"], 0.0)
    W = v["W"] * amp
    H_eff = meta["H_hat"] @ placement.B()
    return PrimalOutcome(
        "infeasible", placement, float(sol.objective),
        W=W, X=v["X"] * amp, U=v["U"], V=v["V"] * meta["scale"], lam=lam,
        sinr=sinr(H_eff, W, meta["noise"]),
        gap=sol.gap, iterations=sol.iterations, scale=meta["scale"], dims=meta["dims"],
        dual_objective=sol.dual_objective,
        dual_residual=sol.dual_residual,
        **_duals(sol, problem, True),
    )


# ---------------------------------------------------------------------------
# Cuts
# ---------------------------------------------------------------------------

def _cut_coefficients(outcome: PrimalOutcome, rule: str) -> np.ndarray:
    M, N, K = outcome.dims
    MN = M * N
    if rule == "lagrangian":
        # -Re<Xi, Z> contributes -2 Re Tr(Xi_31 B); for one-hot B this picks
        # Xi_31[m, m*N + n_m]
        Xi31 = outcome.Xi_block("31")
        cols = np.arange(MN).reshape(M, N)
        return -2.0 * np.real(Xi31[np.arange(M)[:, None], cols])
    if rule == "schur":
        # Maximizing the dual function over the free LMI blocks (Xi_11 = xi I,
        # Xi_31, Xi_33) for each placement gives
        #   g(B) = const - ||Xi_21 B||_F^2 / zeta,   Xi_22 = zeta I,
        # which is separable over antennas for one-hot B.
        Xi21 = outcome.Xi_block("21")
        zeta = float(np.real(np.trace(outcome.Xi_block("22")))) / K
        if not zeta > 1e-12 * (1 + np.abs(outcome.Xi).max()):
            return _cut_coefficients(outcome, "lagrangian")
        col_sq = np.sum(np.abs(Xi21) ** 2, axis=0).reshape(M, N)
        return -col_sq / zeta
    raise ValueError(f"unknown cut rule {rule!r}")


def make_optimality_cut(outcome: PrimalOutcome, placement: Placement | None = None,
                        iteration: int = 0, rule: str = "schur",
                        max_gap: float = 1e-6) -> CutRecord:
    """Optimality cut from a feasible primal outcome.

    The constant is fixed by tightness at the generating placement,
    ``c_t = p*_t - linterm(B_t)``, which equals the Lagrangian constant
    under strong duality.

    ``rule="lagrangian"`` pairs the placement with the solver's ``Xi_31``
    directly; ``rule="schur"`` (default) re-optimizes the LMI multiplier
    blocks that do not touch the SINR constraints, giving a cut that is at
    least as strong at every placement.
    """
    if not outcome.feasible:
        raise ValueError("optimality cuts need a feasible primal outcome")
    if not outcome.gap <= max_gap:
        raise ValueError(f"duality gap {outcome.gap:.2e} too large for a reliable cut")
    placement = placement or outcome.placement
    L = _cut_coefficients(outcome, rule)
    lin_t = float(sum(L[m, n] for m, n in enumerate(placement.positions)))
    value = outcome.objective
    return CutRecord("optimality", value - lin_t, L, iteration, placement.positions, value)


def make_feasibility_cut(outcome: PrimalOutcome, placement: Placement | None = None,
                         iteration: int = 0, rule: str = "schur",
                         min_violation: float = 1e-8) -> CutRecord:
    """Feasibility cut ``c + linterm(B) <= 0`` from a feasibility-check outcome.

    The cut passes through the certified dual bound at the generating
    placement rather than the optimal violation: when the power budget is
    slack the two differ, and only the dual bound is guaranteed valid.
    """
    if outcome.lam is None:
        raise ValueError("feasibility cuts need a feasibility-check outcome")
    value = min(outcome.dual_objective, outcome.objective)
    if not value > min_violation:
        raise ValueError(f"certified violation {value:.2e} is not positive; "
                         "the placement may be feasible")
    placement = placement or outcome.placement
    L = _cut_coefficients(outcome, rule)
    lin_t = float(sum(L[m, n] for m, n in enumerate(placement.positions)))
    return CutRecord("feasibility", value - lin_t, L, iteration, placement.positions, value)


# ---------------------------------------------------------------------------
# Reduced fixed-placement power minimization
# ---------------------------------------------------------------------------

@dataclasses.dataclass
class ReducedResult:
    feasible: bool
    power: float  # watts, inf when infeasible
    W: np.ndarray | None
    sinr: np.ndarray | None


def solve_reduced(H: np.ndarray, gamma, noise,
                  tolerances: Tolerances | None = None) -> ReducedResult:
    """Classic downlink power minimization over ``W`` for a fixed channel.

    ``H`` is ``K x M_eff``. Solved as a second-order cone program with the
    power in a rotated cone ``||(2 vec W, t - 1)|| <= t + 1``.
    """
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    K, M = H.shape
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (K,))
    noise = np.broadcast_to(np.asarray(noise, dtype=float), (K,))
    if np.any(gamma <= 0):
        raise ValueError("SINR targets must be positive (linear scale)")
    Hn, sigma, scale = _normalize(H, noise)

    pb = ProblemBuilder()
    W = pb.complex("W", (M, K))
    t = pb.real("t")
    n = pb.nvar
    pb.minimize(t)
    wcols = [W.rows(np.arange(M) * K + k) for k in range(K)]
    for k in range(K):
        row = Hn[k][None, :]
        useful = wcols[k].lmul(row)
        tail = [wcols[j].lmul(row) for j in range(K) if j != k]
        tail.append(Affine.constant([sigma[k]], n))
        pb.soc(useful.real().scale(1.0 / np.sqrt(gamma[k])), Affine.stack(tail), f"sinr[{k}]")
        pb.equal(useful.imag(), f"phase[{k}]")
    one = Affine.constant([1.0], n)
    pb.soc(t + one, Affine.stack([W.scale(2.0), t - one]), "power")
    sol = solve(pb.build(), tolerances)
    if sol.status is SolveStatus.INFEASIBLE:
        return ReducedResult(False, np.inf, None, None)
    if sol.status is SolveStatus.NUMERICAL_FAILURE:
        raise ConicSolverError(f"reduced power minimization failed: {sol.raw_status}")
    Wv = sol.values["W"] * np.sqrt(scale)
    return ReducedResult(True, float(sol.objective) * scale, Wv, sinr(H, Wv, noise))


def outcome_to_json(outcome: PrimalOutcome) -> str:
    """Compact JSON snapshot of an outcome for regression checks."""
    d = {
        "status": outcome.status,
        "placement": list(outcome.placement.positions),
        "objective": outcome.objective,
        "sinr": None if outcome.sinr is None else [float(s) for s in outcome.sinr],
        "gap": outcome.gap,
        "dual_norms": {
            "mu": None if outcome.mu is None else float(np.linalg.norm(outcome.mu)),
            "nu": None if outcome.nu is None else float(np.linalg.norm(outcome.nu)),
            "Xi": None if outcome.Xi is None else float(np.linalg.norm(outcome.Xi)),
            "xi": outcome.xi,
        },
    }
    if outcome.lam is not None:
        d["lambda"] = [float(v) for v in outcome.lam]
    return json.dumps(d, sort_keys=True)
