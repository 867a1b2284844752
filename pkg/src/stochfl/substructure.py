"""Closed-form optima of the location/VaR subproblems left after fixing flows.

With flows ``y`` and excesses ``u`` fixed, the remaining choice of openings
``x`` (or priority pairs ``s``) and VaR levels ``eta`` decouples into running
maxima along tree paths.  The multistage variants take maxima over a node's
own path and children; the two-stage variants take them over whole stages.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .instance import Instance, ceil_guard
from .risk import ecrm_coefficients
from .scenario_tree import ScenarioTree, TreeMode

UTIL_TOL = 1e-9
FEAS_TOL = 1e-7


class SubstructureError(ValueError):
    pass


@dataclass
class FlowFixing:
    """Fixed flows per node, excesses per non-root node, and openings for prioritized trees."""

    y: dict[int, np.ndarray]
    u: dict[int, float]
    x: dict[int, np.ndarray] | None = None

    @classmethod
    def from_solution(cls, sol, with_x: bool = False) -> "FlowFixing":
        return cls({n: np.asarray(v, dtype=float) for n, v in sol.y.items()},
                   {n: float(v) for n, v in sol.u.items()},
                   {n: np.asarray(v, dtype=float) for n, v in sol.x.items()} if with_x else None)


@dataclass
class SubstructureSolution:
    eta: dict[int, float]
    objective: float
    x: dict[int, np.ndarray] = field(default_factory=dict)
    cum: dict[int, np.ndarray] = field(default_factory=dict)
    s: dict[int, np.ndarray] = field(default_factory=dict)


def utilization(instance: Instance, tree: ScenarioTree, y: np.ndarray, n: int) -> np.ndarray:
    t = tree.stage(n)
    return np.asarray(y).sum(axis=1) / instance.h[t - 1]


def _utilizations(fixing: FlowFixing, instance: Instance, tree: ScenarioTree,
                  tol: float = UTIL_TOL) -> dict[int, np.ndarray]:
    """Per-node utilization, checked against 1 and clipped to it within ``tol``."""
    out = {}
    for n in tree.ids:
        if n not in fixing.y:
            raise SubstructureError(f"no flows given for node {n}")
        b = utilization(instance, tree, fixing.y[n], n)
        if np.any(b > 1.0 + tol):
            raise SubstructureError(f"node {n}: utilization {b.max():.6g} exceeds 1; flows must respect capacity")
        if np.any(fixing.y[n] < -FEAS_TOL):
            raise SubstructureError(f"node {n}: negative flow")
        out[n] = np.minimum(b, 1.0)
    for n in tree.ids:
        if n != tree.root and fixing.u.get(n, 0.0) < -FEAS_TOL:
            raise SubstructureError(f"node {n}: negative excess u")
    return out


def _top_down(tree: ScenarioTree) -> list[int]:
    return [n for t in tree.stages for n in tree.stage_nodes(t)]


def _telescope(tree: ScenarioTree, cum: dict[int, np.ndarray]) -> dict[int, np.ndarray]:
    x = {}
    for n in tree.ids:
        par = tree.parent(n)
        x[n] = cum[n] - (cum[par] if par is not None else 0.0)
    return x


def _stage_value(instance: Instance, tree: ScenarioTree, fixing: FlowFixing, m: int, cum_m) -> float:
    """Stage cost of child ``m`` net of its excess: f'cum + c'y - u."""
    t = tree.stage(m)
    return float(instance.f[t - 1] @ cum_m + np.sum(instance.c[t - 1] * fixing.y[m]) - fixing.u.get(m, 0.0))


def _risk_objective(instance: Instance, tree: ScenarioTree, cum, eta) -> float:
    coef = ecrm_coefficients(tree, instance)
    total = 0.0
    for n in tree.ids:
        total += tree.p(n) * float(coef.f[n] @ cum[n])
        if n in eta:
            total += tree.p(n) * coef.lam[n] * eta[n]
    return total


def _require_demand_tree(tree: ScenarioTree) -> None:
    if tree.mode is not TreeMode.DEMAND_ONLY:
        raise SubstructureError("openings subproblem needs a demand-only tree")


def sp_rms(fixing: FlowFixing, instance: Instance, tree: ScenarioTree,
           tol: float = UTIL_TOL) -> SubstructureSolution:
    """Multistage: cumulative openings are path maxima of rounded-up utilization."""
    _require_demand_tree(tree)
    B = _utilizations(fixing, instance, tree, tol)
    cum = {}
    for n in _top_down(tree):
        par = tree.parent(n)
        own = ceil_guard(B[n])
        cum[n] = own if par is None else np.maximum(cum[par], own)
    eta = {n: max(_stage_value(instance, tree, fixing, m, cum[m]) for m in tree.children(n))
           for n in tree.non_leaves()}
    return SubstructureSolution(eta, _risk_objective(instance, tree, cum, eta), _telescope(tree, cum), cum)


def sp_rts(fixing: FlowFixing, instance: Instance, tree: ScenarioTree,
           tol: float = UTIL_TOL) -> SubstructureSolution:
    """Two-stage: as the multistage rule but with utilization maxed over each stage."""
    _require_demand_tree(tree)
    B = _utilizations(fixing, instance, tree, tol)
    stage_cum = {}
    running = np.zeros(instance.M)
    for t in tree.stages:
        peak = np.max([B[n] for n in tree.stage_nodes(t)], axis=0)
        running = np.maximum(running, ceil_guard(peak))
        stage_cum[t] = running.copy()
    cum = {n: stage_cum[tree.stage(n)].copy() for n in tree.ids}
    eta = {}
    for n in tree.non_leaves():
        nxt = tree.stage_nodes(tree.stage(n) + 1)
        eta[n] = max(_stage_value(instance, tree, fixing, m, cum[m]) for m in nxt)
    return SubstructureSolution(eta, _risk_objective(instance, tree, cum, eta), _telescope(tree, cum), cum)


# ---------------------------------------------------------------------------
# prioritized
# ---------------------------------------------------------------------------

def _prior_cum(fixing: FlowFixing, instance: Instance, tree: ScenarioTree) -> dict[int, np.ndarray]:
    """Cumulative openings excluding the stage-0 root; validates the fixing."""
    if tree.mode is not TreeMode.DEMAND_AND_BUDGET:
        raise SubstructureError("priority subproblem needs a budget-mode tree")
    if fixing.x is None:
        raise SubstructureError("priority subproblem needs fixed openings x")
    root = tree.root
    cum = {root: np.zeros(instance.M)}
    for n in _top_down(tree):
        if n == root:
            continue
        x = np.asarray(fixing.x[n], dtype=float)
        if np.any(np.abs(x - np.round(x)) > FEAS_TOL) or np.any(x < -FEAS_TOL):
            raise SubstructureError(f"node {n}: openings must be 0/1")
        x = np.round(x)
        cum[n] = cum[tree.parent(n)] + x
        if np.any(cum[n] > 1):
            raise SubstructureError(f"node {n}: a site is opened twice along its path")
        if x.sum() > tree.budget(n) + FEAS_TOL:
            raise SubstructureError(f"node {n}: {int(x.sum())} openings exceed budget {tree.budget(n)}")
        y = np.asarray(fixing.y[n], dtype=float)
        t = tree.stage(n)
        if np.any(y.sum(axis=1) > instance.h[t - 1] * cum[n] + FEAS_TOL * max(1.0, instance.h.max())):
            raise SubstructureError(f"node {n}: flow leaves a closed or over-full site")
        if np.any(np.abs(y.sum(axis=0) - tree.demand(n)) > FEAS_TOL * max(1.0, float(np.abs(tree.demand(n)).max()))):
            raise SubstructureError(f"node {n}: flows do not meet demand")
        if fixing.u.get(n, 0.0) < -FEAS_TOL:
            raise SubstructureError(f"node {n}: negative excess u")
    return cum


def _leading(cum_m: np.ndarray, i: int, k: int) -> int | None:
    """Which of (i, k) alone is open in ``cum_m``, if exactly one is."""
    if cum_m[i] < 0.5 <= cum_m[k]:
        return k
    if cum_m[k] < 0.5 <= cum_m[i]:
        return i
    return None


def _order_pair(S: np.ndarray, i: int, k: int, witnesses: list[np.ndarray], where: str) -> None:
    ahead = {w for w in (_leading(c, i, k) for c in witnesses) if w is not None}
    if len(ahead) > 1:
        raise SubstructureError(f"{where}: sites {i} and {k} are each opened without the other; "
                                "no priority list explains the openings")
    if ahead:
        first = ahead.pop()
        S[first, k if first == i else i] = 1.0
    else:
        S[i, k] = 1.0  # tie: the smaller index goes first


def _prior_value(instance: Instance, tree: ScenarioTree, fixing: FlowFixing, s, m: int) -> float:
    t = tree.stage(m)
    v = float(np.sum(instance.c[t - 1] * fixing.y[m])) - fixing.u.get(m, 0.0)
    if not tree.is_leaf(m):
        v += float(s[m].sum())
    return v


def _prior_objective(instance: Instance, tree: ScenarioTree, s, eta) -> float:
    coef = ecrm_coefficients(tree, instance)
    return sum(tree.p(n) * (coef.lam[n] * eta[n] + coef.one[n] * float(s[n].sum())) for n in tree.non_leaves())


def sp_pms(fixing: FlowFixing, instance: Instance, tree: ScenarioTree) -> SubstructureSolution:
    """Multistage priority pairs: each node orders only sites both still closed there."""
    cum = _prior_cum(fixing, instance, tree)
    M = instance.M
    s = {}
    for n in tree.non_leaves():
        S = np.zeros((M, M))
        for i, k in itertools.combinations(range(M), 2):
            if cum[n][i] > 0.5 or cum[n][k] > 0.5:
                continue
            _order_pair(S, i, k, [cum[m] for m in tree.children(n)], f"node {n}")
        s[n] = S
    eta = {n: max(_prior_value(instance, tree, fixing, s, m) for m in tree.children(n)) for n in tree.non_leaves()}
    return SubstructureSolution(eta, _prior_objective(instance, tree, s, eta), cum=cum, s=s)


def sp_pts(fixing: FlowFixing, instance: Instance, tree: ScenarioTree) -> SubstructureSolution:
    """Two-stage priority pairs: one list, ordered by openings anywhere in the tree."""
    cum = _prior_cum(fixing, instance, tree)
    M = instance.M
    S = np.zeros((M, M))
    others = [cum[m] for m in tree.ids if m != tree.root]
    for i, k in itertools.combinations(range(M), 2):
        _order_pair(S, i, k, others, "tree")
    s = {n: S.copy() for n in tree.non_leaves()}
    eta = {}
    for n in tree.non_leaves():
        nxt = tree.stage_nodes(tree.stage(n) + 1)
        eta[n] = max(_prior_value(instance, tree, fixing, s, m) for m in nxt)
    return SubstructureSolution(eta, _prior_objective(instance, tree, s, eta), cum=cum, s=s)


def fixed_cost_part(fixing: FlowFixing, instance: Instance, tree: ScenarioTree) -> float:
    """Objective contribution of the fixed flows and excesses (everything outside the subproblem)."""
    coef = ecrm_coefficients(tree, instance)
    total = 0.0
    for n in tree.ids:
        if n in fixing.y:
            total += tree.p(n) * float(np.sum(coef.c[n] * fixing.y[n]))
        if n != tree.root:
            total += tree.p(n) * coef.alpha[n] * fixing.u.get(n, 0.0)
    return total
