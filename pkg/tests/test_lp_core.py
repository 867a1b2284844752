import itertools
import math

import numpy as np
import pytest
from scipy.optimize import linprog

from stochfl.lp_core import (INF, MixedIntegerProgram, Status, fix_columns, get_lp_solver, get_solver, solve_lp,
                             solve_lp_highs, solve_mip, solve_mip_highs)


def lp_single():
    m = MixedIntegerProgram()
    x = m.add_var("x", 0.0, INF, obj=1.0, key="x")
    m.add_constraint({x: 1.0}, ">=", 3.0)
    return m


def test_single_constraint_lp():
    res = solve_lp(lp_single())
    assert res.ok and res.objective == pytest.approx(3.0)
    assert res.value("x") == pytest.approx(3.0)


def test_forced_flow():
    m = MixedIntegerProgram()
    y = m.add_var("y", 0.0, 10.0, obj=2.0)
    m.add_constraint({y: 1.0}, "=", 5.0)
    assert solve_lp(m).objective == pytest.approx(10.0)


def test_degenerate_redundant_equalities_terminate():
    m = MixedIntegerProgram()
    xs = [m.add_var(f"x{k}", 0.0, INF, obj=c) for k, c in enumerate([-1.0, -1.0, 0.0, 0.0])]
    for _ in range(3):
        m.add_constraint({xs[0]: 1.0, xs[1]: 1.0, xs[2]: 1.0}, "=", 1.0)
    m.add_constraint({xs[0]: 1.0, xs[1]: 1.0, xs[2]: 1.0, xs[3]: 0.0}, "<=", 1.0)
    m.add_constraint({xs[0]: 1.0, xs[3]: 1.0}, "<=", 1.0)
    res = solve_lp(m)
    assert res.ok and res.objective == pytest.approx(-1.0)


def test_beale_cycling_example():
    # classic example on which the textbook largest-coefficient rule cycles
    m = MixedIntegerProgram()
    x = [m.add_var(f"x{k}", 0.0, INF, obj=c) for k, c in enumerate([-0.75, 150.0, -0.02, 6.0])]
    m.add_constraint(dict(zip(x, [0.25, -60.0, -0.04, 9.0])), "<=", 0.0)
    m.add_constraint(dict(zip(x, [0.5, -90.0, -0.02, 3.0])), "<=", 0.0)
    m.add_constraint({x[2]: 1.0}, "<=", 1.0)
    res = solve_lp(m)
    assert res.ok and res.objective == pytest.approx(-0.05)


def test_infeasible_and_unbounded():
    m = MixedIntegerProgram()
    x = m.add_var("x", 0.0, 1.0, obj=1.0)
    m.add_constraint({x: 1.0}, ">=", 2.0)
    assert solve_lp(m).status is Status.INFEASIBLE
    assert solve_mip(m).status is Status.INFEASIBLE
    u = MixedIntegerProgram()
    z = u.add_var("z", -INF, INF, obj=1.0)
    u.add_constraint({z: 1.0}, "<=", 0.0)
    assert solve_lp(u).status is Status.UNBOUNDED


def test_binary_cover():
    m = MixedIntegerProgram()
    a = m.add_var("a", 0, 1, integer=True, obj=1.0)
    b = m.add_var("b", 0, 1, integer=True, obj=1.0)
    m.add_constraint({a: 1.0, b: 1.0}, ">=", 1.0)
    res = solve_mip(m)
    assert res.ok and res.objective == pytest.approx(1.0)
    assert set(np.round(res.x)) <= {0.0, 1.0}


def test_fix_columns():
    m = lp_single()
    fixed = fix_columns(m, {"x": 4.0})
    assert solve_lp(fixed).objective == pytest.approx(4.0)
    assert m.variables[0].lb == 0.0
    assert solve_lp(fix_columns(m, {"x": 3.0})).objective == pytest.approx(3.0)
    with pytest.raises(ValueError):
        fix_columns(m, {"x": -1.0})
    m2 = lp_single()
    m2.variables[0].ub = 10.0
    assert solve_lp(fix_columns(m2, {"x": 1.0})).status is Status.INFEASIBLE


def test_duplicate_handle_and_bad_bounds():
    m = MixedIntegerProgram()
    m.add_var("a", key="k")
    with pytest.raises(ValueError):
        m.add_var("b", key="k")
    with pytest.raises(ValueError):
        m.add_var("c", 2.0, 1.0)
    with pytest.raises(ValueError):
        m.add_constraint({7: 1.0}, "<=", 1.0)


def test_unknown_solver():
    with pytest.raises(ValueError):
        get_solver("cplex")
    with pytest.raises(ValueError):
        get_lp_solver("cplex")


def random_mip(rng, n=6, n_int=None, m=5):
    n_int = n if n_int is None else n_int
    mip = MixedIntegerProgram("rand")
    cols = []
    for j in range(n):
        integer = j < n_int
        cols.append(mip.add_var(f"v{j}", 0.0, 1.0 if integer else float(rng.integers(2, 6)), integer=integer,
                                obj=float(rng.integers(-10, 11))))
    for _ in range(m):
        coef = rng.integers(-5, 6, size=n).astype(float)
        rhs = float(rng.integers(0, 8))
        # the origin stays feasible
        if rng.uniform() < 0.7:
            mip.add_constraint(dict(zip(cols, coef)), "<=", rhs)
        else:
            mip.add_constraint(dict(zip(cols, coef)), ">=", -rhs)
    return mip


def enumerate_oracle(mip):
    """Best objective over all binary patterns, continuous part solved by scipy for each."""
    c, A, senses, b, lb, ub, integer = mip.arrays()
    ints = np.flatnonzero(integer)
    best = math.inf
    for pattern in itertools.product([0.0, 1.0], repeat=len(ints)):
        lo, hi = lb.copy(), ub.copy()
        lo[ints] = hi[ints] = pattern
        le, ge, eq = senses == "<=", senses == ">=", senses == "="
        res = linprog(c, A_ub=np.vstack([A[le], -A[ge]]), b_ub=np.concatenate([b[le], -b[ge]]),
                      A_eq=A[eq] if eq.any() else None, b_eq=b[eq] if eq.any() else None,
                      bounds=list(zip(lo, hi)), method="highs")
        if res.status == 0:
            best = min(best, res.fun)
    return best


def test_mip_matches_enumeration():
    rng = np.random.default_rng(7)
    checked = 0
    for _ in range(40):
        n_int = int(rng.integers(3, 7))
        mip = random_mip(rng, n=n_int + int(rng.integers(0, 3)), n_int=n_int)
        oracle = enumerate_oracle(mip)
        res = solve_mip(mip, rel_gap=1e-12, abs_gap=1e-12)
        checked += 1
        assert res.ok and res.objective == pytest.approx(oracle, abs=1e-8)
        assert mip.max_violation(res.x) <= 1e-9
        assert res.bound <= res.objective + 1e-9
    assert checked == 40


def test_twelve_binary_columns():
    rng = np.random.default_rng(12)
    for _ in range(3):
        mip = random_mip(rng, n=12, m=6)
        oracle = enumerate_oracle(mip)
        res = solve_mip(mip, rel_gap=1e-12, abs_gap=1e-12)
        if math.isinf(oracle):
            assert res.status is Status.INFEASIBLE
        else:
            assert res.objective == pytest.approx(oracle, abs=1e-8)


def test_lp_agrees_with_highs_and_weak_duality():
    rng = np.random.default_rng(3)
    compared = 0
    for _ in range(40):
        mip = random_mip(rng, n=7, n_int=0, m=6)
        ours, ref = solve_lp(mip), solve_lp_highs(mip)
        if ref.status is Status.UNBOUNDED:
            continue
        assert ours.status is ref.status
        if ours.ok:
            compared += 1
            assert ours.objective == pytest.approx(ref.objective, abs=1e-8)
            assert mip.max_violation(ours.x) <= 1e-9
            assert ours.dual_bound <= ours.objective + 1e-8
            assert ours.dual_bound == pytest.approx(ours.objective, abs=1e-7)
    assert compared >= 15


def test_bundled_and_highs_mip_agree():
    rng = np.random.default_rng(5)
    for _ in range(15):
        mip = random_mip(rng, n=8, n_int=5, m=6)
        a, b = solve_mip(mip, rel_gap=1e-12), solve_mip_highs(mip, rel_gap=1e-12)
        assert a.status is b.status
        if a.ok:
            assert a.objective == pytest.approx(b.objective, abs=1e-7)


def test_node_limit_reports_incumbent_or_limit():
    rng = np.random.default_rng(9)
    mip = random_mip(rng, n=12, m=6)
    res = solve_mip(mip, rel_gap=0.0, abs_gap=0.0, node_limit=2)
    assert res.status in (Status.GAP_LIMIT, Status.ITER_LIMIT, Status.OPTIMAL, Status.INFEASIBLE)
    if res.x is not None:
        assert res.bound <= res.objective + 1e-9


def test_deterministic():
    rng = np.random.default_rng(11)
    mip = random_mip(rng, n=10, m=6)
    a, b = solve_mip(mip), solve_mip(mip)
    assert a.status is b.status and a.nodes == b.nodes
    if a.x is not None:
        assert np.array_equal(a.x, b.x)


def test_lp_export_mentions_every_column():
    mip = random_mip(np.random.default_rng(0), n=4, m=2)
    text = mip.to_lp_format()
    assert text.startswith("\\ rand") and "General" in text and text.rstrip().endswith("End")
    for j in range(4):
        assert f"v{j}" in text
