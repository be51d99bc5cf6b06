import math

import numpy as np
import pytest

from magbd.baselines import (
    OracleGuardError,
    SchemeResult,
    baseline_antenna_selection,
    baseline_ao_bcd,
    baseline_fixed_random,
    oracle_exhaustive,
    random_placement,
)
from magbd.gbd import SolverConfig, run
from magbd.master import Placement
from magbd.primal import solve_reduced
from magbd.scenario import ScenarioConfig, distance_matrix, upa_channel

GAMMA = 10.0


def test_scheme_result_checks():
    with pytest.raises(ValueError):
        SchemeResult("greedy", True, 1.0, (0,), 0.0)
    with pytest.raises(ValueError):
        SchemeResult("oracle", True, -1.0, (0,), 0.0)
    assert SchemeResult("oracle", False, math.inf, None, 0.0).status == "infeasible"


def test_random_placement_is_feasible_and_seeded(desk_D):
    a = random_placement(desk_D, 0.04, 3, 5)
    assert a == random_placement(desk_D, 0.04, 3, 5)
    assert Placement(a, 9).is_feasible(desk_D, 0.04)
    with pytest.raises(ValueError):
        random_placement(desk_D, 1.0, 2, 0, max_draws=50)


def test_fixed_random_single_element():
    sc = ScenarioConfig(M=1, K=1, area_scale_l=1, step_d_m=0.03)
    ch = sc.channel(2)
    D = distance_matrix(sc.grid())
    res = baseline_fixed_random(ch, D, sc.dmin_m, GAMMA, 7)
    (n,) = res.placement
    assert res.power_w == pytest.approx(GAMMA * ch.noise[0] / abs(ch.H_base[0, n]) ** 2,
                                        rel=1e-7)
    assert res.placement == baseline_fixed_random(ch, D, sc.dmin_m, GAMMA, 7).placement


def test_fixed_random_not_below_gbd(desk, desk_D):
    ch = desk.channel(1)
    g = run(ch, desk_D, SolverConfig())
    for seed in range(5):
        fr = baseline_fixed_random(ch, desk_D, desk.dmin_m, GAMMA, seed)
        assert fr.power_w >= g.power * (1 - 1e-6)


def test_antenna_selection_counts():
    sc = ScenarioConfig(M=4, K=4)
    paths = sc.paths(0)
    ch = sc.channel(0)
    H = upa_channel(paths, sc.grid(), 4, sc.lambda_m)
    res = baseline_antenna_selection(H, 4, GAMMA, ch.noise)
    assert res.iterations == 70 and res.info["subsets"] == 70
    assert res.feasible
    half = solve_reduced(H[:, [0, 1, 2, 3]], GAMMA, ch.noise).power
    assert res.power_w <= half * (1 + 1e-9)
    rng = np.random.default_rng(0)
    for _ in range(5):
        subset = sorted(rng.choice(8, 4, replace=False))
        assert res.power_w <= solve_reduced(H[:, subset], GAMMA, ch.noise).power * (1 + 1e-9)


def test_antenna_selection_single_element():
    sc = ScenarioConfig(M=1, K=1)
    H = upa_channel(sc.paths(3), sc.grid(), 1, sc.lambda_m)
    res = baseline_antenna_selection(H, 1, GAMMA, sc.noise_w)
    assert res.iterations == 2
    want = GAMMA * sc.noise_w / np.abs(H[0]) ** 2
    assert res.power_w == pytest.approx(want.min(), rel=1e-7)
    with pytest.raises(ValueError):
        baseline_antenna_selection(H, 2, GAMMA, sc.noise_w)


def test_antenna_selection_all_infeasible():
    H = np.ones((3, 2), dtype=complex)
    res = baseline_antenna_selection(H, 1, GAMMA, 1.0)
    assert not res.feasible and res.power_w == math.inf


def test_oracle_counts_and_guard():
    sc = ScenarioConfig(M=2, K=2, area_scale_l=1, step_d_m=0.06)
    ch = sc.channel(0)
    D = distance_matrix(sc.grid())
    res = oracle_exhaustive(ch, D, sc.dmin_m, GAMMA)
    assert res.info == {"assignments": 12, "solved": 6}
    full = oracle_exhaustive(ch, D, sc.dmin_m, GAMMA, symmetric=False)
    assert full.info["solved"] == 12
    assert full.power_w == pytest.approx(res.power_w, rel=1e-7)
    with pytest.raises(OracleGuardError):
        oracle_exhaustive(ch, D, sc.dmin_m, GAMMA, guard=11)


def test_ao_single_element_matches_oracle():
    sc = ScenarioConfig(M=1, K=1, area_scale_l=1, step_d_m=0.03)
    D = distance_matrix(sc.grid())
    for seed in range(3):
        ch = sc.channel(seed)
        ao = baseline_ao_bcd(ch, D, sc.dmin_m, GAMMA, Placement((4,), 9))
        ref = oracle_exhaustive(ch, D, sc.dmin_m, GAMMA)
        assert ao.power_w == pytest.approx(ref.power_w, rel=1e-7)


@pytest.mark.parametrize("merit", ["sinr-slack", "power"])
def test_ao_trace_and_dominance(desk, desk_D, merit):
    for seed in range(4):
        ch = desk.channel(seed)
        start = Placement(random_placement(desk_D, desk.dmin_m, 2, seed), 9)
        ao = baseline_ao_bcd(ch, desk_D, desk.dmin_m, GAMMA, start, merit=merit)
        trace = ao.info["power_trace"]
        assert all(b <= a for a, b in zip(trace, trace[1:]))
        assert trace[0] == pytest.approx(solve_reduced(ch.effective(start.positions),
                                                       GAMMA, ch.noise).power)
        ref = oracle_exhaustive(ch, desk_D, desk.dmin_m, GAMMA)
        assert ao.power_w >= ref.power_w * (1 - 1e-6)
        assert Placement(ao.placement, 9).is_feasible(desk_D, desk.dmin_m)
    with pytest.raises(ValueError):
        baseline_ao_bcd(ch, desk_D, desk.dmin_m, GAMMA, start, merit="gradient")


def test_oracle_not_above_baselines(desk, desk_D):
    ch = desk.channel(9)
    ref = oracle_exhaustive(ch, desk_D, desk.dmin_m, GAMMA)
    fr = baseline_fixed_random(ch, desk_D, desk.dmin_m, GAMMA, 1)
    assert ref.power_w <= fr.power_w * (1 + 1e-7)
    assert np.all(ref.sinr >= GAMMA * (1 - 1e-6))
