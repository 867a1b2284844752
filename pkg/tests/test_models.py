import dataclasses
import itertools
import warnings

import numpy as np
import pytest

from conftest import dro_oracle, rng_for, small_instance, small_tree
from stochfl.golden import EX1_LAMBDAS, EX2_LAMBDAS, EX2_VMS, example_one, example_one_values, example_two
from stochfl.instance import Instance, RiskParams
from stochfl.lp_core import Status
from stochfl.models import (FormulationKind, ModelError, build, build_deterministic, build_dro_two_stage,
                            build_multistage, build_prioritized, build_two_stage, prioritization_cuts, solve_model)
from stochfl.scenario_tree import TreeMode, chain_tree, from_levels


def one_site(f=3.0, c=2.0, h=10.0, T=1):
    return Instance(np.full((T, 1), f), np.full((T, 1, 1), c), np.full((T, 1), h), RiskParams.constant(T))


# -- deterministic ------------------------------------------------------------

def test_deterministic_example_one_high_path():
    inst, _ = example_one(0.5)
    model = build_deterministic(inst, [[0.0], [150.0]])
    sol = solve_model(model)
    assert sol.objective == pytest.approx(2 * 10 + 50 * 1 + 100 * 2)
    assert sol.x[2].tolist() == [1.0, 1.0]


def test_deterministic_zero_demand():
    inst, _ = example_one(0.5)
    sol = solve_model(build_deterministic(inst, np.zeros((2, 1))))
    assert sol.objective == pytest.approx(0.0)
    assert all(not x.any() for x in sol.x.values())


def test_deterministic_single_site_by_hand():
    assert solve_model(build_deterministic(one_site(), [[5.0]])).objective == pytest.approx(13.0)


def test_deterministic_row_counts():
    inst = small_instance(rng_for(1), T=3, M=2, N=4)
    mip = build_deterministic(inst, np.ones((3, 4))).mip
    assert mip.num_constraints == 3 * 4 + 2 * 3 * 2
    assert mip.num_vars == 3 * 2 + 3 * 2 * 4


def test_deterministic_over_capacity_is_infeasible():
    model = build_deterministic(one_site(), [[50.0]])
    assert model.solve().status is Status.INFEASIBLE


def test_deterministic_bad_path_shape():
    with pytest.raises(ModelError):
        build_deterministic(one_site(), [[1.0], [2.0]])


# -- Example 1 -----------------------------------------------------------------

@pytest.mark.parametrize("lam", EX1_LAMBDAS)
def test_example_one_closed_forms(lam):
    inst, tree = example_one(lam)
    want = example_one_values(lam)
    assert solve_model(build_multistage(inst, tree)).objective == pytest.approx(want["z_ms"], abs=1e-6)
    for transformed in (True, False):
        z = solve_model(build_two_stage(inst, tree, transformed)).objective
        assert z == pytest.approx(want["z_ts"], abs=1e-6)


def test_example_one_other_costs():
    inst, tree = example_one(0.25, f=7.0, c11=3.0, c21=4.0)
    want = example_one_values(0.25, f=7.0, c11=3.0, c21=4.0)
    assert solve_model(build_multistage(inst, tree)).objective == pytest.approx(want["z_ms"], abs=1e-6)


def test_risk_neutral_objective_is_expected_cost():
    rng = rng_for(2)
    for _ in range(3):
        inst = small_instance(rng, T=2, lam=0.0)
        tree = small_tree(rng, inst)
        sol = solve_model(build_multistage(inst, tree), solver="highs")
        expected = 0.0
        for n in tree.ids:
            t = tree.stage(n)
            expected += tree.p(n) * (inst.f[t - 1] @ sol.cumulative_x(tree, n) + np.sum(inst.c[t - 1] * sol.y[n]))
        assert sol.objective == pytest.approx(expected, rel=1e-8)
        other = solve_model(build_multistage(inst.with_risk(lam=0.0, alpha=0.3), tree), solver="highs")
        assert other.objective == pytest.approx(sol.objective, rel=1e-8)


def test_single_path_matches_deterministic():
    rng = rng_for(3)
    for _ in range(3):
        inst = small_instance(rng, T=3)
        tree = small_tree(rng, inst, C=1)
        path = np.array([tree.demand(n) for n in tree.ids])
        det = solve_model(build_deterministic(inst, path)).objective
        assert solve_model(build_multistage(inst, tree)).objective == pytest.approx(det, abs=1e-6)
        assert solve_model(build_two_stage(inst, tree)).objective == pytest.approx(det, abs=1e-6)


def test_transformed_and_original_two_stage_agree():
    rng = rng_for(4)
    for _ in range(8):
        inst = small_instance(rng, T=int(rng.integers(2, 4)))
        tree = small_tree(rng, inst)
        a = solve_model(build_two_stage(inst, tree, True), solver="highs", rel_gap=1e-10).objective
        b = solve_model(build_two_stage(inst, tree, False), solver="highs", rel_gap=1e-10).objective
        assert a == pytest.approx(b, abs=1e-6)


def test_two_stage_never_beats_multistage():
    rng = rng_for(5)
    for _ in range(6):
        inst = small_instance(rng, T=3)
        tree = small_tree(rng, inst, kind=str(rng.choice(["sd", "si", "sd0"])))
        ms = solve_model(build_multistage(inst, tree), solver="highs", rel_gap=1e-10).objective
        ts = solve_model(build_two_stage(inst, tree), solver="highs", rel_gap=1e-10).objective
        assert ts >= ms - 1e-6


def test_tree_mode_mismatch():
    inst, tree = example_one(0.5)
    inst2, tree2 = example_two(0.5)
    with pytest.raises(ModelError):
        build_multistage(inst2, tree2)
    with pytest.raises(ModelError):
        build_two_stage(inst2, tree2, transformed=False)
    with pytest.raises(ModelError):
        build_prioritized(inst, tree)


def test_handle_registry_multistage():
    inst, tree = example_one(0.5)
    H = build_multistage(inst, tree).mip.handles
    for n in tree.ids:
        assert all((n, "x", i) in H for i in range(inst.M))
        assert all((n, "y", i, 0) in H for i in range(inst.M))
        assert ((n, "eta") in H) == (not tree.is_leaf(n))
        assert ((n, "u") in H) == (n != tree.root)
    assert len(H) == build_multistage(inst, tree).mip.num_vars


# -- prioritized ---------------------------------------------------------------

@pytest.mark.parametrize("lam", EX2_LAMBDAS)
def test_example_two_gap(lam):
    inst, tree = example_two(lam)
    ms = solve_model(build_prioritized(inst, tree, multistage=True)).objective
    for transformed in (True, False):
        ts = solve_model(build_prioritized(inst, tree, multistage=False, transformed=transformed)).objective
        assert ts - ms == pytest.approx(EX2_VMS, abs=1e-6)


def test_handle_registry_prioritized():
    inst, tree = example_two(0.5)
    model = build_prioritized(inst, tree)
    H = model.mip.handles
    pairs = list(itertools.permutations(range(3), 2))
    for n in tree.ids:
        assert all(((n, "s", i, k) in H) == (not tree.is_leaf(n)) for i, k in pairs)
        assert all(((n, "s", i, i) not in H) for i in range(3))
        assert ((n, "x", 0) in H) == (n != tree.root)
        assert ((n, "eta") in H) == (not tree.is_leaf(n))
        assert ((n, "u") in H) == (n != tree.root)
    assert len(H) == model.mip.num_vars


def test_symmetric_pair_single_scenario():
    inst = Instance(np.full((1, 2), 5.0), np.ones((1, 2, 1)), np.full((1, 2), 10.0), RiskParams.constant(1))
    sol = solve_model(build_prioritized(inst, chain_tree([[4.0]], budgets=[2])))
    assert sol.s[1].sum() == pytest.approx(1.0)
    assert sol.objective == pytest.approx(1.0 + 4.0)


def test_slack_budgets_reduce_to_flow_cost():
    rng = rng_for(6)
    for _ in range(4):
        M, N = 3, 3
        inst = small_instance(rng, T=1, M=M, N=N, equal_sites=True)
        d = rng.uniform(1, 8, size=N)
        tree = chain_tree([d], budgets=[M])
        flows = solve_model(build_deterministic(dataclasses.replace(inst, f=np.zeros((1, M))), [d])).objective
        z = solve_model(build_prioritized(inst, tree)).objective
        assert z == pytest.approx(flows + M * (M - 1) / 2, abs=1e-6)


def test_unequal_sites_rejected():
    rng = rng_for(7)
    inst = small_instance(rng, T=2, equal_sites=False)
    tree = small_tree(rng, inst, budget=True)
    with pytest.raises(ModelError, match="same setup cost"):
        build_prioritized(inst, tree)


def test_prioritized_original_and_transformed_agree():
    rng = rng_for(8)
    for _ in range(6):
        inst = small_instance(rng, T=2, M=3, N=2, equal_sites=True)
        tree = small_tree(rng, inst, budget=True)
        a = solve_model(build_prioritized(inst, tree, False, True), solver="highs", rel_gap=1e-10).objective
        b = solve_model(build_prioritized(inst, tree, False, False), solver="highs", rel_gap=1e-10).objective
        assert a == pytest.approx(b, abs=1e-6)


def test_cycle_rows_keep_objective():
    inst, tree = example_two(0.5)
    plain = solve_model(build_prioritized(inst, tree)).objective
    assert solve_model(build_prioritized(inst, tree, cycles=True)).objective == pytest.approx(plain, abs=1e-6)


def test_opened_zero_matches_plain_model():
    inst, tree = example_two(0.5)
    plain = solve_model(build_prioritized(inst, tree)).objective
    assert solve_model(build_prioritized(inst, tree, opened=[0, 0, 0])).objective == pytest.approx(plain)
    with pytest.raises(ModelError):
        build_prioritized(inst, tree, opened=[0, 0])


# -- cuts ------------------------------------------------------------------------

def sibling_tree(F1, F2):
    return from_levels([[(0, None, None)], [(0, [1.0], F1), (0, [1.0], F2)]], TreeMode.DEMAND_AND_BUDGET)


def test_cuts_follow_budget_order():
    cuts = prioritization_cuts(sibling_tree(3, 2), 4)
    assert len(cuts) == 4
    assert all(c.high == 2 and c.low == 3 for c in cuts)
    assert sorted(c.site for c in cuts) == [0, 1, 2, 3]


def test_equal_budgets_cut_both_ways():
    cuts = prioritization_cuts(sibling_tree(2, 2), 3)
    assert len(cuts) == 6
    assert {(c.high, c.low) for c in cuts} == {(2, 3), (3, 2)}


def test_chain_has_no_cuts():
    assert prioritization_cuts(chain_tree([[1.0], [2.0]], budgets=[1, 1]), 3) == []


def test_cuts_need_budget_tree():
    _, tree = example_one(0.5)
    with pytest.raises(ModelError):
        prioritization_cuts(tree, 2)


def test_cuts_leave_objective_unchanged():
    inst, tree = example_two(0.5)
    for kind in (FormulationKind.MULTISTAGE_PRIORITIZED, FormulationKind.TWO_STAGE_PRIORITIZED_TRANSFORMED):
        plain = solve_model(build(kind, inst, tree)).objective
        cut = build(kind, inst, tree, cuts=True)
        assert cut.info["cuts"] == len(prioritization_cuts(tree, inst.M))
        assert solve_model(cut).objective == pytest.approx(plain, abs=1e-6)
    rng = rng_for(9)
    for _ in range(4):
        inst = small_instance(rng, T=2, M=3, N=2, equal_sites=True)
        tree = small_tree(rng, inst, budget=True)
        plain = solve_model(build_prioritized(inst, tree), solver="highs", rel_gap=1e-10).objective
        cut = solve_model(build_prioritized(inst, tree, cuts=True), solver="highs", rel_gap=1e-10).objective
        assert cut == pytest.approx(plain, abs=1e-6)


def test_build_dispatch_rejects_dro():
    inst, tree = example_one(0.5)
    with pytest.raises(ModelError):
        build("dro", inst, tree)


# -- DRO -------------------------------------------------------------------------

def test_dro_single_site_by_hand():
    model = build_dro_two_stage(one_site(h=6.0), [[[5.0]]], 1.0)
    assert solve_model_dro(model) == pytest.approx(15.0)
    assert model.info["blocks"] == 2


def solve_model_dro(model):
    res = model.solve(rel_gap=1e-12, abs_gap=1e-12)
    assert res.ok
    return res.objective


@pytest.mark.filterwarnings("ignore:.*clamped")
def test_dro_matches_enumeration():
    rng = rng_for(10)
    for _ in range(4):
        T, M, N, K = int(rng.integers(1, 3)), 2, int(rng.integers(1, 3)), int(rng.integers(1, 4))
        inst = small_instance(rng, T=T, M=M, N=N, h=20.0)
        samples = rng.uniform(0.0, 8.0, size=(K, T, N))
        eps = float(rng.uniform(0, 2))
        model = build_dro_two_stage(inst, samples, eps)
        assert model.info["blocks"] == K * T * N * 2
        assert solve_model_dro(model) == pytest.approx(dro_oracle(inst, samples, eps), abs=1e-8)


def test_dro_zero_radius_is_saa():
    rng = rng_for(11)
    inst = small_instance(rng, T=2, M=2, N=2, h=20.0)
    samples = rng.uniform(1.0, 8.0, size=(3, 2, 2))
    assert solve_model_dro(build_dro_two_stage(inst, samples, 0.0)) == pytest.approx(
        dro_oracle(inst, samples, 0.0), abs=1e-8)


def test_dro_clamps_with_warning():
    with pytest.warns(RuntimeWarning, match="clamped"):
        model = build_dro_two_stage(one_site(), [[[0.5]]], 1.0)
    assert model.info["clamped"] == 1
    assert solve_model_dro(model) == pytest.approx(3.0 + 2.0 * 1.5)


def test_dro_input_checks():
    with pytest.raises(ModelError):
        build_dro_two_stage(one_site(), [[[1.0]]], -0.1)
    with pytest.raises(ModelError):
        build_dro_two_stage(one_site(), [[1.0]], 0.1)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        build_dro_two_stage(one_site(), [[[2.0]]], 1.0)
