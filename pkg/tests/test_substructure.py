import numpy as np
import pytest

from conftest import oracle_fixed_solve, random_flow_fixing, random_priority_fixing, rng_for, small_instance, small_tree
from stochfl.golden import example_one, example_two
from stochfl.models import build_multistage, build_prioritized, build_two_stage, solve_model
from stochfl.scenario_tree import chain_tree
from stochfl.substructure import (FlowFixing, SubstructureError, fixed_cost_part, sp_pms, sp_pts, sp_rms, sp_rts)


def example_one_flows(u=0.0):
    y = {1: np.zeros((2, 1)), 2: np.array([[50.0], [0.0]]), 3: np.array([[50.0], [100.0]])}
    return FlowFixing(y, {2: u, 3: u})


def test_example_one_multistage_openings():
    inst, tree = example_one(0.5)
    sol = sp_rms(example_one_flows(), inst, tree)
    assert sol.cum[2].tolist() == [1.0, 0.0]
    assert sol.cum[3].tolist() == [1.0, 1.0]
    assert sol.x[1].tolist() == [0.0, 0.0]


@pytest.mark.parametrize("lam", [0.0, 0.5, 1.0])
def test_example_one_two_stage_gap(lam):
    inst, tree = example_one(lam)
    fx = example_one_flows()
    ts, ms = sp_rts(fx, inst, tree), sp_rms(fx, inst, tree)
    assert ts.cum[2].tolist() == ts.cum[3].tolist() == [1.0, 1.0]
    assert ts.objective - ms.objective == pytest.approx(0.5 * (1 - lam) * 10.0)


def test_zero_flows_open_nothing():
    inst, tree = example_one(0.5)
    fx = FlowFixing({n: np.zeros((2, 1)) for n in tree.ids}, {2: 1.0, 3: 4.0})
    sol = sp_rms(fx, inst, tree)
    assert all(not v.any() for v in sol.cum.values())
    assert sol.eta[1] == pytest.approx(-1.0)


def test_single_path_two_stage_equals_multistage():
    rng = rng_for(21)
    inst = small_instance(rng)
    tree = small_tree(rng, inst, C=1)
    fx = random_flow_fixing(rng, inst, tree)
    assert sp_rts(fx, inst, tree).objective == pytest.approx(sp_rms(fx, inst, tree).objective)


def test_overfull_flows_rejected():
    inst, tree = example_one(0.5)
    fx = example_one_flows()
    fx.y[3] = np.array([[60.0], [90.0]])
    with pytest.raises(SubstructureError, match="utilization"):
        sp_rms(fx, inst, tree)


def test_round_off_utilization_does_not_open():
    inst, tree = example_one(0.5)
    fx = example_one_flows()
    fx.y[3] = np.array([[50.0 * (1 + 1e-11)], [100.0]])
    assert sp_rms(fx, inst, tree).cum[3].tolist() == [1.0, 1.0]
    fx.y[2] = np.array([[1e-12], [0.0]])
    assert sp_rms(fx, inst, tree).cum[2].tolist() == [0.0, 0.0]


def random_case(rng, equal_sites=False):
    M, N = int(rng.integers(2, 5)), int(rng.integers(2, 5))
    inst = small_instance(rng, T=3, M=M, N=N, equal_sites=equal_sites)
    tree = small_tree(rng, inst, C=2, kind=str(rng.choice(["sd", "si", "sd0"])), budget=equal_sites)
    return inst, tree


@pytest.mark.parametrize("variant", ["rms", "rts"])
def test_closed_form_matches_milp(variant):
    rng = rng_for(22 if variant == "rms" else 23)
    for _ in range(10):
        inst, tree = random_case(rng)
        fx = random_flow_fixing(rng, inst, tree)
        if variant == "rms":
            model, sol = build_multistage(inst, tree), sp_rms(fx, inst, tree)
        else:
            model, sol = build_two_stage(inst, tree), sp_rts(fx, inst, tree)
        res = oracle_fixed_solve(model, fx)
        assert sol.objective + fixed_cost_part(fx, inst, tree) == pytest.approx(res.objective, abs=1e-8)
        vec = model.vector(x=sol.x, y=fx.y, eta=sol.eta, u=fx.u)
        assert model.mip.max_violation(vec) <= 1e-9


@pytest.mark.parametrize("variant", ["pms", "pts"])
def test_priority_closed_form_matches_milp(variant):
    rng = rng_for(24 if variant == "pms" else 25)
    for _ in range(10):
        inst, tree = random_case(rng, equal_sites=True)
        fx = random_priority_fixing(rng, inst, tree)
        model = build_prioritized(inst, tree, multistage=(variant == "pms"))
        sol = (sp_pms if variant == "pms" else sp_pts)(fx, inst, tree)
        res = oracle_fixed_solve(model, fx, with_x=True)
        assert sol.objective + fixed_cost_part(fx, inst, tree) == pytest.approx(res.objective, abs=1e-8)
        vec = model.vector(x=fx.x, y=fx.y, eta=sol.eta, u=fx.u, s=sol.s)
        assert model.mip.max_violation(vec) <= 1e-9
        assert all(set(np.unique(S)) <= {0.0, 1.0} for S in sol.s.values())


def test_two_stage_value_dominates():
    rng = rng_for(26)
    for _ in range(15):
        inst, tree = random_case(rng)
        fx = random_flow_fixing(rng, inst, tree)
        assert sp_rts(fx, inst, tree).objective >= sp_rms(fx, inst, tree).objective - 1e-9
        inst, tree = random_case(rng, equal_sites=True)
        fx = random_priority_fixing(rng, inst, tree)
        assert sp_pts(fx, inst, tree).objective >= sp_pms(fx, inst, tree).objective - 1e-9


def test_telescoping_identity():
    rng = rng_for(27)
    for _ in range(10):
        inst, tree = random_case(rng)
        fx = random_flow_fixing(rng, inst, tree)
        sol = sp_rms(fx, inst, tree)
        for n in tree.ids:
            path = tree.path(n)
            util = [np.ceil(fx.y[m].sum(axis=1) / inst.h[tree.stage(m) - 1] - 1e-9) for m in path]
            assert np.array_equal(sum(sol.x[m] for m in path), np.max(util, axis=0))
            assert np.all(sol.x[n] >= 0)


def test_example_two_priority_lists():
    inst, tree = example_two(0.5)
    sol = solve_model(build_prioritized(inst, tree, multistage=False))
    fx = FlowFixing.from_solution(sol, with_x=True)
    ts, ms = sp_pts(fx, inst, tree), sp_pms(fx, inst, tree)
    strict = np.triu(np.ones((3, 3)), 1)
    for n in tree.non_leaves():
        assert np.array_equal(ts.s[n], strict)
    assert np.array_equal(ms.s[1], strict)
    # site 0 is open on both stage-1 nodes, leaving only the (1, 2) pair
    for n in tree.stage_nodes(1):
        assert ms.s[n].sum() == 1.0 and ms.s[n][1, 2] == 1.0
    assert ts.objective - ms.objective == pytest.approx(2.0)


def test_everything_open_at_stage_one_needs_no_pairs():
    inst, _ = example_two(0.5)
    tree = chain_tree([[1.0], [1.0]], budgets=[3, 3])
    fx = FlowFixing({1: np.zeros((3, 1)), 2: np.array([[1.0], [0.0], [0.0]]), 3: np.array([[1.0], [0.0], [0.0]])},
                    {2: 0.0, 3: 0.0}, {2: np.ones(3), 3: np.zeros(3)})
    assert sp_pms(fx, inst, tree).s[2].sum() == 0.0


def test_budget_overrun_rejected():
    inst, tree = example_two(0.5)
    sol = solve_model(build_prioritized(inst, tree))
    fx = FlowFixing.from_solution(sol, with_x=True)
    fx.x[2] = np.ones(3)
    with pytest.raises(SubstructureError, match="budget"):
        sp_pms(fx, inst, tree)


def test_conflicting_openings_rejected():
    inst, tree = example_two(0.5)
    sol = solve_model(build_prioritized(inst, tree, multistage=True))
    fx = FlowFixing.from_solution(sol, with_x=True)
    # node 2 opens site 1 first while node 3 keeps site 0
    fx.x[2] = np.array([0.0, 1.0, 0.0])
    fx.y[2] = np.array([[0.0], [50.0], [0.0]])
    fx.x[4] = np.array([1.0, 0.0, 0.0])
    fx.x[5] = np.array([1.0, 0.0, 1.0])
    fx.y[4] = np.array([[100.0], [100.0], [0.0]])
    fx.y[5] = np.array([[100.0], [100.0], [100.0]])
    with pytest.raises(SubstructureError, match="no priority list"):
        sp_pts(fx, inst, tree)


def test_priority_needs_openings():
    inst, tree = example_two(0.5)
    sol = solve_model(build_prioritized(inst, tree))
    with pytest.raises(SubstructureError):
        sp_pms(FlowFixing.from_solution(sol), inst, tree)
    with pytest.raises(SubstructureError, match="demand-only"):
        sp_rms(FlowFixing.from_solution(sol), inst, tree)
