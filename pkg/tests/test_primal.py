import dataclasses
import itertools
import json

import numpy as np
import pytest

from conftest import degenerate_channel, fixed_point_power
from magbd.conic import ConeKind
from magbd.master import Placement, evaluate_cut, feasible_placements
from magbd.primal import (
    assemble_feasibility,
    assemble_primal,
    make_feasibility_cut,
    make_optimality_cut,
    outcome_to_json,
    sinr,
    solve_feasibility,
    solve_primal,
    solve_reduced,
)
from magbd.scenario import make_channel

GAMMA = np.array([10.0, 10.0])


def lmi_matrix(out):
    """The LMI at the solution, in the solver's normalized units."""
    amp = np.sqrt(out.scale)
    B = out.placement.B()
    W, X, V, U = out.W / amp, out.X / amp, out.V / out.scale, out.U
    M = W.shape[0]
    return np.block([[U, X, B], [X.conj().T, V, W.conj().T], [B.T, W, np.eye(M)]])


@pytest.fixture(scope="module")
def solved(desk):
    ch = desk.channel(3)
    pl = Placement((1, 6), 9)
    return ch, pl, solve_primal(assemble_primal(ch, pl, GAMMA))


def test_closed_form_single_user():
    ch = make_channel(np.array([[1.0]]), 1, 1.0)
    out = solve_primal(assemble_primal(ch, Placement((0,), 1), [1.0]))
    assert out.feasible
    assert out.objective == pytest.approx(1.0, rel=1e-7)
    assert abs(out.W[0, 0]) == pytest.approx(1.0, rel=1e-7)


@pytest.mark.parametrize("h, gamma, noise", [(2.0 - 1.0j, 3.0, 0.5), (1e-4j, 10.0, 1e-11)])
def test_closed_form_scalar(h, gamma, noise):
    ch = make_channel(np.array([[h]]), 1, noise)
    out = solve_primal(assemble_primal(ch, Placement((0,), 1), [gamma]))
    assert out.objective == pytest.approx(gamma * noise / abs(h) ** 2, rel=1e-7)


def test_noise_scaling(desk):
    ch = desk.channel(1)
    pl = Placement((0, 8), 9)
    base = solve_primal(assemble_primal(ch, pl, GAMMA)).objective
    for c in (1e-3, 7.0):
        scaled = solve_primal(assemble_primal(ch, pl, GAMMA, noise=ch.noise * c)).objective
        assert scaled == pytest.approx(c * base, rel=1e-7)


@pytest.mark.parametrize("seed", [0, 5])
def test_matches_reduced_and_fixed_point(desk, desk_D, seed):
    ch = desk.channel(seed)
    rng = np.random.default_rng(seed)
    placements = list(feasible_placements(desk_D, desk.dmin_m, 2))
    for i in rng.choice(len(placements), 4, replace=False):
        p = placements[i]
        full = solve_primal(assemble_primal(ch, Placement(p, 9), GAMMA)).objective
        red = solve_reduced(ch.effective(p), GAMMA, ch.noise).power
        fp = fixed_point_power(ch.effective(p), GAMMA, ch.noise)
        assert full == pytest.approx(red, rel=1e-6)
        assert full == pytest.approx(fp, rel=1e-6)


def test_constraint_layout():
    rng = np.random.default_rng(0)
    H = rng.normal(size=(2, 4)) + 1j * rng.normal(size=(2, 4))
    ch = make_channel(H, 2, 1.0)
    prob = assemble_primal(ch, Placement((0, 3), 4), GAMMA)
    assert prob.count(ConeKind.SOC) == 2
    # the phase condition Im{h^H x_k} = 0 is one real equality per user
    assert prob.count(ConeKind.ZERO) == 2
    assert prob.count(ConeKind.PSD) == 1
    assert prob.count(ConeKind.NONNEG) == 1
    assert prob.block("C2a").dim == 24  # complex order 2*4 + 2 + 2
    assert set(prob.labels()) == {"C1a[0]", "C1a[1]", "C1b[0]", "C1b[1]", "C2a", "C2b"}
    feas = assemble_feasibility(ch, Placement((0, 3), 4), GAMMA)
    assert {"C1a-bar[0]", "C1a-bar[1]", "C6", "cap"} <= set(feas.labels())


def test_input_validation():
    ch = make_channel(np.ones((2, 4)), 2, 1.0)
    with pytest.raises(ValueError):
        assemble_primal(ch, Placement((0, 1), 4), [10.0, 0.0])
    with pytest.raises(ValueError):
        assemble_primal(ch, Placement((0, 1), 5), GAMMA)
    with pytest.raises(ValueError):
        assemble_primal(ch, Placement((0, 1, 2), 4), GAMMA)
    with pytest.raises(ValueError):
        solve_primal(assemble_feasibility(ch, Placement((0, 1), 4), GAMMA))


def test_solution_invariants(solved):
    ch, pl, out = solved
    B = pl.B()
    assert np.linalg.norm(out.X - B @ out.W) <= 1e-6 * (1 + np.linalg.norm(out.W))
    assert np.all(out.sinr >= GAMMA * (1 - 1e-6))
    np.testing.assert_allclose(out.sinr, sinr(ch.effective(pl.positions), out.W, ch.noise))
    assert out.power == pytest.approx(out.objective, rel=1e-7)
    # phase normalization, in normalized units
    Hn = ch.H_hat / np.sqrt(ch.noise)[:, None]
    for k in range(2):
        v = Hn[k] @ out.X[:, k]
        assert v.real >= 0
        assert abs(v.imag) <= 1e-7 * (1 + abs(v))
    assert np.real(np.trace(out.U)) <= 2 + 1e-6
    L = lmi_matrix(out)
    assert np.linalg.eigvalsh(L).min() >= -1e-7 * (1 + np.abs(L).max())


def test_dual_invariants(solved):
    _, pl, out = solved
    MN, K, M = 18, 2, 2
    assert out.Xi.shape == (MN + K + M,) * 2
    assert np.allclose(out.Xi, out.Xi.conj().T)
    ev = np.linalg.eigvalsh(out.Xi)
    assert ev.min() >= -1e-7 * (1 + ev.max())
    assert np.all(out.mu >= -1e-9) and out.xi >= 0
    assert out.gap <= 1e-7
    # complementary slackness <Xi, LMI> = 0, both in normalized units
    S = lmi_matrix(out)
    assert abs(np.real(np.vdot(out.Xi / out.scale, S))) <= 1e-6
    assert out.Xi_block("31").shape == (M, MN)


def test_gamma_monotone(desk):
    ch = desk.channel(2)
    pl = Placement((0, 4), 9)
    targets = [np.array([2.0, 2.0]), np.array([2.0, 5.0]), np.array([8.0, 5.0]),
               np.array([8.0, 20.0])]
    powers = [solve_primal(assemble_primal(ch, pl, g)).objective for g in targets]
    assert all(b >= a for a, b in zip(powers, powers[1:]))


def test_feasibility_examples(desk):
    ch = desk.channel(0)
    pl = Placement((0, 8), 9)
    ok = solve_feasibility(assemble_feasibility(ch, pl, GAMMA))
    assert ok.objective <= 1e-7
    # one element cannot serve two users at 0 dB SINR each
    single = make_channel(ch.H_base, 1, ch.noise)
    bad = solve_feasibility(assemble_feasibility(single, Placement((4,), 9), GAMMA))
    assert bad.objective > 0 and bad.status == "infeasible"
    assert np.all(bad.lam >= -1e-9)


def test_infeasible_routes_to_check(desk):
    ch = degenerate_channel(desk, 0)
    pl = Placement((0, 1), 9)
    out = solve_primal(assemble_primal(ch, pl, GAMMA))
    assert not out.feasible and out.objective == np.inf
    check = solve_feasibility(assemble_feasibility(ch, pl, GAMMA))
    assert check.objective > 1e-3


def test_optimality_cut_tight_and_valid(desk, desk_D):
    ch = desk.channel(4)
    gen = Placement((2, 6), 9)
    out = solve_primal(assemble_primal(ch, gen, GAMMA))
    cuts = [make_optimality_cut(out, gen, 1, rule) for rule in ("schur", "lagrangian")]
    for cut in cuts:
        assert evaluate_cut(cut, gen) == pytest.approx(out.objective, rel=1e-12)
    for p in itertools.islice(feasible_placements(desk_D, desk.dmin_m, 2), 0, 72, 5):
        value = solve_reduced(ch.effective(p), GAMMA, ch.noise).power
        for cut in cuts:
            assert evaluate_cut(cut, p) <= value * (1 + 1e-5)
    # the re-optimized rule is never weaker
    for p in feasible_placements(desk_D, desk.dmin_m, 2):
        assert evaluate_cut(cuts[0], p) >= evaluate_cut(cuts[1], p) - 1e-12


def test_zero_multiplier_gives_constant_cut(solved):
    _, pl, out = solved
    zero = dataclasses.replace(out, Xi=np.zeros_like(out.Xi))
    cut = make_optimality_cut(zero, pl, rule="lagrangian")
    assert np.all(cut.coeffs == 0)
    assert cut.constant == out.objective


def test_cut_rejects_large_gap(solved):
    _, pl, out = solved
    with pytest.raises(ValueError):
        make_optimality_cut(dataclasses.replace(out, gap=1e-3), pl)


def test_feasibility_cut(desk, desk_D):
    ch = degenerate_channel(desk, 2)
    gen = Placement((1, 0), 9)
    check = solve_feasibility(assemble_feasibility(ch, gen, GAMMA))
    cut = make_feasibility_cut(check, gen, 1)
    assert evaluate_cut(cut, gen) > 0
    for p in feasible_placements(desk_D, desk.dmin_m, 2):
        if set(p) == {0, 1}:
            continue
        assert solve_reduced(ch.effective(p), GAMMA, ch.noise).feasible
        assert evaluate_cut(cut, p) <= 1e-5


def test_feasibility_cut_rejects_zero_violation(desk):
    ch = desk.channel(0)
    pl = Placement((0, 8), 9)
    check = solve_feasibility(assemble_feasibility(ch, pl, GAMMA))
    with pytest.raises(ValueError):
        make_feasibility_cut(check, pl)
    out = solve_primal(assemble_primal(ch, pl, GAMMA))
    with pytest.raises(ValueError):
        make_feasibility_cut(out, pl)


def test_direct_method_agrees():
    rng = np.random.default_rng(1)
    H = rng.normal(size=(1, 2)) + 1j * rng.normal(size=(1, 2))
    ch = make_channel(H, 1, 0.1)
    pl = Placement((1,), 2)
    face = solve_primal(assemble_primal(ch, pl, [4.0]))
    direct = solve_primal(assemble_primal(ch, pl, [4.0]), method="direct")
    assert direct.objective == pytest.approx(face.objective, rel=1e-4)
    assert face.objective == pytest.approx(4.0 * 0.1 / abs(H[0, 1]) ** 2, rel=1e-7)


def test_outcome_json(solved):
    _, _, out = solved
    d = json.loads(outcome_to_json(out))
    assert d["status"] == "feasible"
    assert d["placement"] == [1, 6]
    assert len(d["sinr"]) == 2
