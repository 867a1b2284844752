import itertools
import math

import numpy as np
import pytest
from scipy.optimize import linprog

from stochfl.evaluation import (ROLLING_COLUMNS, EvaluationError, Policy, RollingConfig, RollingResult,
                                StageInfeasible, SweepConfig, nearest_rank, per_stage_implementation,
                                priority_order, relative_vms, rolling_horizon, rolling_table, seed_for, sweep,
                                tail_instance, with_sigma)
from stochfl.golden import example_one, example_two
from stochfl.instance import Instance, RiskParams, generate_grid_instance
from stochfl.models import build_prioritized, solve_model
from stochfl.scenario_tree import TreeMode, build_tree

STRICT = np.triu(np.ones((3, 3)), 1)


def three_sites(c=(5.0, 4.0, 1.0), h=10.0, T=1):
    cost = np.zeros((T, 3, 1))
    cost[:, :, 0] = c
    return Instance(np.ones((T, 3)), cost, np.full((T, 3), h), RiskParams.constant(T))


def small_grid(seed=0, **kw):
    return generate_grid_instance(seed, T=2, M=3, N=4, **kw)


def test_aggregates():
    r = RollingResult("TwoStagePrior", 0, [1.0, 2.0, 3.0, 4.0], 0, [0, 1])
    assert r.mean == 2.5
    assert r.p95 == 4.0 and r.p75 == 3.0
    assert r.n_paths == 4


def test_nearest_rank():
    values = list(range(1, 101))
    assert nearest_rank(values, 95) == 95.0
    assert nearest_rank(values, 75) == 75.0
    assert nearest_rank([7.0], 50) == 7.0
    assert math.isnan(nearest_rank([], 50))
    with pytest.raises(ValueError):
        nearest_rank([1.0], 0)


def test_priority_order_breaks_ties_by_index():
    assert priority_order(STRICT) == [0, 1, 2]
    S = np.zeros((3, 3))
    S[2, 0] = S[2, 1] = 1
    assert priority_order(S) == [2, 0, 1]
    assert priority_order(np.ones((3, 3)) - np.eye(3)) == [0, 1, 2]


def test_seed_streams_are_distinct_and_stable():
    a = np.random.default_rng(seed_for(3, 1, 0)).random()
    assert a == np.random.default_rng(seed_for(3, 1, 0)).random()
    assert a != np.random.default_rng(seed_for(3, 1, 1)).random()


def test_zero_budget_uses_open_sites():
    out = per_stage_implementation(STRICT, [8.0], 0, [1, 0, 0], three_sites(), 1)
    assert out.opened.tolist() == [0.0, 0.0, 0.0]
    assert out.cost == pytest.approx(40.0)


def test_strict_list_opens_prefix():
    # site 2 is cheapest but the list puts it last
    out = per_stage_implementation(STRICT, [15.0], 2, [0, 0, 0], three_sites(), 1)
    assert out.opened.tolist() == [1.0, 1.0, 0.0]
    assert out.cost == pytest.approx(10 * 4.0 + 5 * 5.0)


def prefix_oracle(inst, S, d, F, have):
    """Cheapest flow over every opening set that respects the list and budget."""
    best = math.inf
    for x in itertools.product([0, 1], repeat=inst.M):
        x = np.array(x)
        if np.any(x[np.asarray(have) > 0]) or x.sum() > F:
            continue
        cum = x + have
        if any(S[i, k] and cum[i] < cum[k] for i in range(inst.M) for k in range(inst.M) if i != k):
            continue
        M, N = inst.M, inst.N
        res = linprog(inst.c[0].ravel(), A_ub=np.kron(np.eye(M), np.ones(N)), b_ub=inst.h[0] * cum,
                      A_eq=np.kron(np.ones(M), np.eye(N)), b_eq=d, bounds=(0, None), method="highs")
        if res.status == 0:
            best = min(best, res.fun)
    return best


def test_stage_matches_enumeration():
    rng = np.random.default_rng(51)
    for _ in range(20):
        inst = three_sites(c=tuple(rng.integers(1, 10, 3).astype(float)))
        S = np.zeros((3, 3))
        for i, k in itertools.combinations(rng.permutation(3), 2):
            S[i, k] = 1
        have = np.zeros(3)
        if rng.uniform() < 0.5:
            have[rng.integers(3)] = 1
        d = [float(rng.uniform(0, 25))]
        F = int(rng.integers(0, 3))
        want = prefix_oracle(inst, S, d, F, have)
        if math.isinf(want):
            with pytest.raises(StageInfeasible):
                per_stage_implementation(S, d, F, have, inst, 1)
        else:
            out = per_stage_implementation(S, d, F, have, inst, 1)
            assert out.cost == pytest.approx(want, abs=1e-8)


def test_example_two_first_stage():
    inst, tree = example_two(0.5)
    for n in tree.stage_nodes(1):
        out = per_stage_implementation(STRICT, tree.demand(n), tree.budget(n), np.zeros(3), inst, 1)
        assert out.opened.tolist() == [1.0, 0.0, 0.0]


def test_uncoverable_stage_raises():
    with pytest.raises(StageInfeasible):
        per_stage_implementation(STRICT, [25.0], 1, [0, 0, 0], three_sites(), 1)


def test_forecast_matching_reality_repeats_in_sample_flows():
    inst = with_sigma(small_grid(4), 0.0).with_risk(lam=0.5)
    tree = build_tree("sd", inst, 1, 4, TreeMode.DEMAND_AND_BUDGET)
    sol = solve_model(build_prioritized(inst, tree, multistage=False), solver="highs")
    in_sample = sum(float(np.sum(inst.c[tree.stage(n) - 1] * sol.y[n])) for n in tree.ids[1:])
    opened, realized = np.zeros(inst.M), 0.0
    for n in tree.ids[1:]:
        out = per_stage_implementation(sol.s[tree.root], tree.demand(n), tree.budget(n), opened, inst, tree.stage(n))
        opened += out.opened
        realized += out.cost
    assert realized == pytest.approx(in_sample, rel=1e-9)


@pytest.mark.parametrize("policy", list(Policy))
def test_rolling_is_deterministic(policy):
    inst = small_grid(1)
    a = rolling_horizon(inst, RollingConfig(), policy, 4, master_seed=9)
    b = rolling_horizon(inst, RollingConfig(), policy, 4, master_seed=9)
    assert a.costs == b.costs and a.lists == b.lists and a.first_list == b.first_list
    assert a.n_paths == 4
    assert a.mean == pytest.approx(np.mean(a.costs)) and a.p95 >= a.p75 >= 0
    assert sorted(a.first_list) == [0, 1, 2]


def test_two_stage_policy_keeps_one_list():
    r = rolling_horizon(small_grid(2), RollingConfig(), Policy.TWO_STAGE, 3, master_seed=1)
    assert all(lists == [r.first_list] for lists in r.lists)
    m = rolling_horizon(small_grid(2), RollingConfig(), Policy.MULTISTAGE, 3, master_seed=1)
    assert all(len(lists) == 2 for lists in m.lists)
    assert len(m.solve_times) == 1 + 3


def test_shifted_reality_counts_infeasible_paths():
    inst = small_grid(3)
    heavy = Instance(inst.f, inst.c, inst.h, inst.risk, 6.0 * inst.demand_mean, 0.01 * inst.demand_mean)
    r = rolling_horizon(inst, RollingConfig(), Policy.TWO_STAGE, 3, master_seed=2, reality=heavy)
    # draws are resampled to fit total capacity, so only some paths outrun the budgets
    assert r.infeasible >= 1 and r.n_paths == 3
    assert len(r.costs) == len(r.lists) == 3 - r.infeasible


def test_rolling_input_checks():
    uneven = Instance(np.array([[1.0, 2.0]]), np.ones((1, 2, 1)), np.ones((1, 2)), RiskParams.constant(1))
    with pytest.raises(EvaluationError):
        rolling_horizon(uneven, RollingConfig(), "TwoStagePrior", 1, 0)
    with pytest.raises(EvaluationError):
        rolling_horizon(small_grid(), RollingConfig(), "TwoStagePrior", 0, 0)
    with pytest.raises(ValueError):
        rolling_horizon(small_grid(), RollingConfig(), "greedy", 1, 0)


def test_tail_instance():
    inst = small_grid(5)
    tail = tail_instance(inst, 2)
    assert tail.T == 1 and np.array_equal(tail.c[0], inst.c[1])
    with pytest.raises(EvaluationError):
        tail_instance(inst, 3)


def test_rolling_table_layout():
    rows = rolling_table(small_grid(6), [0.0, 1.0], 2, master_seed=3)
    assert [(r["lambda"], r["policy"]) for r in rows] == [
        (0.0, "TwoStagePrior"), (0.0, "MultistagePrior"), (1.0, "TwoStagePrior"), (1.0, "MultistagePrior")]
    assert all(tuple(r) == ROLLING_COLUMNS for r in rows)


SMALL = SweepConfig(T=2, M=3, N=4)


def test_zero_spread_gives_zero_value():
    res = sweep("sigma", [0.0], seeds=[0], config=SMALL)
    assert res.rows[0]["mean"] == pytest.approx(0.0, abs=1e-9)


def test_sweep_rows_per_value_and_kind():
    res = sweep("C", [1, 2], tree_kinds=("sd", "si"), seeds=[0, 1], config=SMALL)
    assert [(r["value"], r["tree_kind"]) for r in res.rows] == [(1, "sd"), (1, "si"), (2, "sd"), (2, "si")]
    assert res.means("sd")[1] == pytest.approx(0.0, abs=1e-9)
    assert all(r["n"] == 2 and r["failures"] == 0 for r in res.rows)
    lines = res.to_csv().strip().split("\n")
    assert lines[0] == ",".join(res.COLUMNS) and len(lines) == 5


def test_risk_weight_lowers_value_on_example_one():
    values = [relative_vms(*example_one(lam)) for lam in (0.0, 1.0)]
    assert values[1] <= values[0]
    assert values[1] == pytest.approx(0.0, abs=1e-9)


def test_sweep_failures_recorded():
    res = sweep("T", [6], seeds=[0, 1], config=SMALL)
    assert res.rows[0]["failures"] == 2 and res.rows[0]["n"] == 0


def test_sweep_rejects_unknown_names():
    with pytest.raises(ValueError):
        sweep("budget", [1])
    with pytest.raises(ValueError):
        sweep("C", [1], metric="cost")
