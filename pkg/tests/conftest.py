import itertools
import math

import numpy as np
import pytest
from scipy.optimize import linprog

from stochfl.instance import Instance, RiskParams
from stochfl.lp_core import fix_columns, solve_mip
from stochfl.scenario_tree import TreeMode, build_tree
from stochfl.substructure import FlowFixing


def rng_for(seed):
    return np.random.Generator(np.random.PCG64(seed))


def small_instance(rng, T=3, M=3, N=3, equal_sites=False, lam=None, alpha=None, h=10.0):
    """Tiny instance with integer costs and demand parameters sized to the capacity."""
    if equal_sites:
        f = np.repeat(rng.integers(1, 20, size=(T, 1)).astype(float), M, axis=1)
        cap = np.full((T, M), h)
    else:
        f = rng.integers(1, 20, size=(T, M)).astype(float)
        cap = rng.integers(int(h // 2), int(h * 1.5) + 1, size=(T, M)).astype(float)
    c = rng.integers(1, 10, size=(T, M, N)).astype(float)
    lam = rng.uniform(0, 1) if lam is None else lam
    alpha = rng.uniform(0.3, 0.95) if alpha is None else alpha
    mean = rng.uniform(0.5, 1.0, size=(T, N)) * cap.sum(axis=1, keepdims=True) / (1.5 * N)
    return Instance(f, c, cap, RiskParams.constant(T, lam, alpha), mean, 0.5 * mean)


def small_tree(rng, inst, C=2, kind="sd", budget=False):
    mode = TreeMode.DEMAND_AND_BUDGET if budget else TreeMode.DEMAND_ONLY
    return build_tree(kind, inst, C, int(rng.integers(2**31)), mode)


def _spread(rng, d, caps):
    """Random flows meeting demand d within per-site capacities caps."""
    M, N = len(caps), len(d)
    W = rng.uniform(0.05, 1.0, size=(M, N)) * (caps[:, None] > 0)
    if W.sum() > 0:
        y = W / np.where(W.sum(axis=0) > 0, W.sum(axis=0), 1.0) * d
        if np.all(y.sum(axis=1) <= caps + 1e-9):
            return y
    res = linprog(rng.uniform(1, 2, M * N), A_ub=np.kron(np.eye(M), np.ones(N)), b_ub=caps,
                  A_eq=np.kron(np.ones(M), np.eye(N)), b_eq=d, bounds=(0, None), method="highs")
    assert res.status == 0
    return res.x.reshape(M, N)


def _excess(rng):
    return 0.0 if rng.uniform() < 0.4 else float(rng.uniform(0, 30))


def random_flow_fixing(rng, inst, tree):
    y, u = {}, {}
    for n in tree.ids:
        t = tree.stage(n)
        y[n] = _spread(rng, tree.demand(n), inst.h[t - 1].copy())
        if n != tree.root:
            u[n] = _excess(rng)
    return FlowFixing(y, u)


def random_priority_fixing(rng, inst, tree):
    """Openings follow one random global list; each node opens enough for its stage's peak demand."""
    M = inst.M
    h = float(inst.h[0, 0])
    order = rng.permutation(M)
    peak = {t: max(tree.demand(n).sum() for n in tree.stage_nodes(t)) for t in tree.stages if t > 0}
    cum = {tree.root: 0}
    x, y, u = {}, {}, {}
    for t in tree.stages:
        if t == 0:
            continue
        for n in tree.stage_nodes(t):
            have = cum[tree.parent(n)]
            need = max(math.ceil(peak[t] / h - 1e-9) - have, 0)
            top = min(tree.budget(n), M - have)
            k = int(rng.integers(need, top + 1))
            cum[n] = have + k
            xn = np.zeros(M)
            xn[order[have:have + k]] = 1
            x[n] = xn
            opened = np.zeros(M)
            opened[order[:cum[n]]] = 1
            y[n] = _spread(rng, tree.demand(n), opened * inst.h[t - 1])
            u[n] = _excess(rng)
    return FlowFixing(y, u, x)


def oracle_fixed_solve(model, fixing, with_x=False):
    """Fix the given columns of a full model and solve the rest exactly with the bundled B&B."""
    values = {}
    for n, Y in fixing.y.items():
        for (i, j), v in np.ndenumerate(Y):
            values[(n, "y", i, j)] = v
    for n, v in fixing.u.items():
        values[(n, "u")] = v
    if with_x:
        for n, X in fixing.x.items():
            for i, v in enumerate(X):
                values[(n, "x", i)] = v
    res = solve_mip(fix_columns(model.mip, values), rel_gap=1e-12, abs_gap=1e-10)
    assert res.status.value == "Optimal", res.status
    return res


def transport(inst, t, open_sites, d):
    M, N = inst.M, inst.N
    caps = inst.h[t] * open_sites
    res = linprog(inst.c[t].ravel(), A_ub=np.kron(np.eye(M), np.ones(N)), b_ub=caps,
                  A_eq=np.kron(np.ones(M), np.eye(N)), b_eq=d, bounds=(0, None), method="highs")
    return res.fun if res.status == 0 else math.inf


def dro_oracle(inst, samples, eps):
    """Brute force over opening stages per site, worst single-entry perturbation per sample."""
    T, M, N = inst.T, inst.M, inst.N
    best = math.inf
    # each site opens at one stage or never
    for when in itertools.product(range(T + 1), repeat=M):
        cum = np.array([[1.0 if when[i] <= t else 0.0 for i in range(M)] for t in range(T)])
        rent = float(np.sum(inst.f * cum))
        total = 0.0
        for d in samples:
            worst = -math.inf
            for th, jh, r in itertools.product(range(T), range(N), (-1, 1)):
                dd = d.copy()
                dd[th, jh] = max(dd[th, jh] + r * eps, 0.0)
                worst = max(worst, sum(transport(inst, t, cum[t], dd[t]) for t in range(T)))
            total += worst
        best = min(best, rent + total / len(samples))
    return best


@pytest.fixture
def rng():
    return rng_for(20240611)
