import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from magbd.master import (
    CutRecord,
    MasterInfeasible,
    Placement,
    evaluate_cut,
    expand_glover,
    export_milp,
    feasible_placements,
    glover_feasible,
    parse_lp,
    solve_exported_milp,
    solve_master,
    solve_master_enumerate,
)
from magbd.scenario import build_grid, distance_matrix

CORNERS = distance_matrix(build_grid(1, 0.06, 0.06))  # 4 corners of a 0.06 m square


def opt_cut(coeffs, generator, value, iteration=0):
    coeffs = np.asarray(coeffs, dtype=float)
    lin = sum(coeffs[m, n] for m, n in enumerate(generator))
    return CutRecord("optimality", value - lin, coeffs, iteration, tuple(generator), value)


def feas_cut(coeffs, generator, value, iteration=0):
    coeffs = np.asarray(coeffs, dtype=float)
    lin = sum(coeffs[m, n] for m, n in enumerate(generator))
    return CutRecord("feasibility", value - lin, coeffs, iteration, tuple(generator), value)


def test_placement_structure():
    p = Placement((2, 0), 3)
    B = p.B()
    assert B.shape == (6, 2)
    np.testing.assert_array_equal(B.T @ B, np.eye(2))
    np.testing.assert_array_equal(p.b().sum(axis=1), [1, 1])
    y = p.y()[(0, 1)]
    assert y[2, 0] == 1 and y.sum() == 1
    with pytest.raises(ValueError):
        Placement((3,), 3)


def test_feasible_placement_counts():
    assert len(list(feasible_placements(CORNERS, 0.015, 2))) == 12
    assert len(list(feasible_placements(CORNERS, 0.015, 2, increasing=True))) == 6
    assert list(feasible_placements(CORNERS, 0.07, 2)) == [(0, 3), (1, 2), (2, 1), (3, 0)]


def test_constant_cut():
    cut = opt_cut(np.zeros((2, 4)), (0, 3), 5.0)
    sol = solve_master(CORNERS, 0.015, [cut], 2)
    assert sol.eta == 5.0
    assert sol.placement == (0, 1)  # lexicographically smallest on ties
    assert evaluate_cut(cut, (2, 1)) == 5.0


def test_single_negative_coefficient_per_antenna():
    eps = 0.25
    L = np.zeros((2, 4))
    L[0, 2] = L[1, 1] = -eps
    cut = opt_cut(L, (0, 3), 5.0)
    sol = solve_master(CORNERS, 0.015, [cut], 2)
    assert sol.placement == (2, 1)
    assert sol.eta == pytest.approx(cut.constant - 2 * eps)


def test_diagonal_only_grid_matches_enumeration():
    rng = np.random.default_rng(0)
    cuts = [opt_cut(rng.normal(size=(2, 4)), (0, 3), 1.0, t) for t in range(3)]
    bb = solve_master(CORNERS, 0.07, cuts, 2)
    brute = min((max(evaluate_cut(c, p) for c in cuts), p)
                for p in itertools.product(range(4), repeat=2)
                if p[0] != p[1] and CORNERS[p] >= 0.07)
    assert bb.placement in {(0, 3), (1, 2), (2, 1), (3, 0)}
    assert bb.eta == brute[0]
    assert bb.nodes <= 16


def test_cut_linearity():
    rng = np.random.default_rng(3)
    L = rng.normal(size=(3, 5))
    cut = opt_cut(L, (0, 1, 2), 2.0)
    a, b = (0, 4, 2), (3, 4, 2)
    assert evaluate_cut(cut, b) - evaluate_cut(cut, a) == pytest.approx(L[0, 3] - L[0, 0])


def test_cut_record_checks():
    with pytest.raises(AssertionError):
        CutRecord("optimality", 1.0, np.zeros((1, 2)), 0, (0,), 2.0)
    with pytest.raises(AssertionError):
        feas_cut(np.zeros((1, 2)), (0,), -1.0)
    with pytest.raises(ValueError):
        CutRecord("other", 1.0, np.zeros((1, 2)), 0, (0,), 1.0)


def test_feasibility_cuts_exclude_everything():
    cuts = [feas_cut(np.zeros((2, 4)), (0, 1), 1.0)]
    with pytest.raises(MasterInfeasible):
        solve_master(CORNERS, 0.015, cuts, 2)
    with pytest.raises(MasterInfeasible):
        solve_master(CORNERS, 1.0, [opt_cut(np.zeros((2, 4)), (0, 1), 1.0)], 2)


def test_feasibility_cut_prunes_generator():
    L = np.zeros((2, 4))
    L[0, 0] = 1.0
    cuts = [opt_cut(np.zeros((2, 4)), (1, 2), 0.0), feas_cut(L, (0, 1), 0.5)]
    sol = solve_master(CORNERS, 0.015, cuts, 2)
    assert sol.placement[0] != 0


@st.composite
def cut_pools(draw):
    side = draw(st.sampled_from([2, 3, 5]))
    M = draw(st.integers(1, 3))
    dmin = draw(st.sampled_from([0.0, 0.015, 0.03, 0.05]))
    step = 0.12 / (side - 1)
    D = distance_matrix(build_grid(2, 0.06, step))
    N = D.shape[0]
    seed = draw(st.integers(0, 2 ** 32 - 1))
    rng = np.random.default_rng(seed)
    cuts = []
    gens = list(itertools.islice(feasible_placements(D, dmin, M), 50))
    if not gens:
        return D, dmin, M, cuts
    for t in range(draw(st.integers(1, 6))):
        g = gens[rng.integers(len(gens))]
        # integer-valued data keeps the comparison exact
        L = rng.integers(-5, 6, size=(M, N)).astype(float)
        if draw(st.booleans()) and t:
            cuts.append(feas_cut(L, g, float(rng.integers(1, 4)), t))
        else:
            cuts.append(opt_cut(L, g, float(rng.integers(0, 20)), t))
    return D, dmin, M, cuts


@settings(max_examples=60, deadline=None)
@given(pool=cut_pools(), sym=st.booleans())
def test_branch_and_bound_matches_enumeration(pool, sym):
    D, dmin, M, cuts = pool
    try:
        ref = solve_master_enumerate(D, dmin, cuts, M, sym)
    except MasterInfeasible:
        with pytest.raises(MasterInfeasible):
            solve_master(D, dmin, cuts, M, sym)
        return
    bb = solve_master(D, dmin, cuts, M, sym)
    assert bb.eta == ref.eta
    assert bb.placement == ref.placement  # both break ties lexicographically
    assert bb.nodes <= ref.nodes  # never more placements than exist
    assert Placement(bb.placement, D.shape[0]).is_feasible(D, dmin)
    assert all(evaluate_cut(c, bb.placement) <= 0 for c in cuts if c.kind == "feasibility")


def test_glover_examples():
    D = distance_matrix(build_grid(1, 0.06, 0.03))
    system = expand_glover(D, 0.04, 3)
    assert system.n_y == 3 * 81
    b = Placement((0, 8, 2), 9).b()
    y = system.implied_y(b)
    for (m, mp), ymm in y.items():
        np.testing.assert_array_equal(ymm, np.outer(b[m], b[mp]))
    assert system.feasible(b)
    assert not system.feasible(Placement((0, 1, 8), 9).b())  # 0.03 apart
    assert glover_feasible(D, 0.04, 0, 4) and not glover_feasible(D, 0.04, 0, 1)


def test_glover_residual_families():
    D = distance_matrix(build_grid(1, 0.06, 0.03))
    system = expand_glover(D, 0.03, 2)
    b = Placement((0, 1), 9).b()
    res = system.residuals(b, system.implied_y(b))
    assert set(res) == {"C4", "C5a", "C5b", "C5c"}
    assert all(np.all(v <= 1e-12) for v in res.values())
    # a y that is not the outer product breaks C5c
    bad = {(0, 1): np.zeros((9, 9))}
    assert system.residuals(b, bad)["C5c"].max() > 0


@settings(max_examples=100, deadline=None)
@given(i=st.integers(0, 24), j=st.integers(0, 24), dmin=st.floats(0.0, 0.2))
def test_glover_exactness(i, j, dmin):
    D = distance_matrix(build_grid(2, 0.06, 0.03))
    assert glover_feasible(D, dmin, i, j) == (D[i, j] >= dmin - 1e-12)


def test_milp_export_round_trip():
    rng = np.random.default_rng(7)
    D = distance_matrix(build_grid(1, 0.06, 0.03))
    cuts = [opt_cut(rng.normal(size=(2, 9)), (0, 8), 3.0, 1),
            opt_cut(rng.normal(size=(2, 9)), (2, 6), 2.5, 2),
            feas_cut(rng.normal(size=(2, 9)), (1, 4), 0.2, 3)]
    text = export_milp(D, 0.03, cuts, 2)
    lp = parse_lp(text)
    assert len([n for n in lp["binaries"] if n.startswith("y_")]) == 81
    eta, placement = solve_exported_milp(text, 2, 9)
    bb = solve_master(D, 0.03, cuts, 2)
    assert eta == bb.eta and placement == bb.placement
