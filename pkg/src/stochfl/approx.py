"""Alternating heuristic for the risk-averse location models.

Start from the LP relaxation, then alternate between (a) the closed-form
optimal openings and VaR levels for the current flows and (b) per-node flow
LPs for the current openings.  Each pass can only lower the objective.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .instance import Instance
from .lp_core import INF, MixedIntegerProgram, get_lp_solver
from .models import Model, build_multistage, build_two_stage, extract_solution
from .risk import ecrm_coefficients
from .scenario_tree import ScenarioTree, TreeMode
from .substructure import FlowFixing, sp_rms, sp_rts

INTEGRAL_TOL = 1e-9
LP_UTIL_TOL = 1e-6


class ApproxError(RuntimeError):
    pass


class Termination(str, enum.Enum):
    CONVERGED = "Converged"
    ITER_CAP = "IterCap"
    INTEGRAL_LP = "IntegralLpRelaxation"


@dataclass
class ApproxTrace:
    objectives: list[float]
    x: dict[int, np.ndarray]
    eta: dict[int, float]
    y: dict[int, np.ndarray]
    u: dict[int, float]
    iterations: int
    reason: Termination
    ratio_bound: float
    lp_objective: float
    residuals: list[float] = field(default_factory=list)
    empirical_ratio: float | None = None
    wall_time: float = 0.0

    @property
    def objective(self) -> float:
        return self.objectives[-1]

    def with_optimum(self, z_opt: float) -> "ApproxTrace":
        self.empirical_ratio = self.objective / z_opt if z_opt > 0 else math.nan
        return self

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "objective"])
        for k, v in enumerate(self.objectives, start=1):
            w.writerow([k, repr(float(v))])
        return buf.getvalue()


def ratio_bound(instance: Instance, tree: ScenarioTree) -> float:
    """Worst-case ratio of the heuristic objective to the optimum.

    1 + M sum_t f_max,t / (M_min sum_t f_min,t + sum_t c_min,t min_{n in stage t} sum_j d_nj),
    with M_min the number of largest stage-1 sites needed for the root demand (at least 1).
    """
    if tree.mode is not TreeMode.DEMAND_ONLY:
        raise ApproxError("ratio bound is defined for demand-only trees")
    M = instance.M
    root = tree.root
    t1 = tree.stage(root)
    h_max = float(instance.h[t1 - 1].max())
    need = math.ceil(float(tree.demand(root).sum()) / h_max - 1e-9) if h_max > 0 else 0
    m_min = max(1, need)
    stages = tree.stages
    f_max = sum(float(instance.f[t - 1].max()) for t in stages)
    f_min = sum(float(instance.f[t - 1].min()) for t in stages)
    flow = sum(float(instance.c[t - 1].min()) * min(float(tree.demand(n).sum()) for n in tree.stage_nodes(t))
               for t in stages)
    denom = m_min * f_min + flow
    if denom <= 0:
        raise ApproxError("ratio bound undefined: zero rental and flow lower bounds")
    return 1.0 + M * f_max / denom


def _is_integral(sol, tol: float = INTEGRAL_TOL) -> bool:
    return all(np.all(np.abs(v - np.round(v)) <= tol) for v in sol.x.values())


def _node_lp(instance: Instance, tree: ScenarioTree, n: int, cum: np.ndarray, eta_parent: float | None,
             c_weight: np.ndarray, u_weight: float) -> MixedIntegerProgram:
    """Flow problem at one node for fixed cumulative openings and parent VaR level."""
    M, N = instance.M, instance.N
    t = tree.stage(n)
    mip = MixedIntegerProgram(f"flows[{n}]")
    y = {(i, j): mip.add_var(f"y{i},{j}", 0.0, INF, obj=float(c_weight[i, j]), key=("y", i, j))
         for i in range(M) for j in range(N)}
    d = tree.demand(n)
    for j in range(N):
        mip.add_constraint({y[(i, j)]: 1.0 for i in range(M)}, "=", float(d[j]))
    for i in range(M):
        mip.add_constraint({y[(i, j)]: 1.0 for j in range(N)}, "<=", float(instance.h[t - 1, i] * cum[i]))
    if eta_parent is not None:
        u = mip.add_var("u", 0.0, INF, obj=u_weight, key=("u",))
        terms = {u: 1.0}
        for (i, j), col in y.items():
            terms[col] = -float(instance.c[t - 1, i, j])
        rhs = float(instance.f[t - 1] @ cum) - eta_parent
        mip.add_constraint(terms, ">=", rhs)
    return mip


def _flows_step(model: Model, cum, eta, lp_solver: str):
    inst, tree = model.instance, model.tree
    coef = ecrm_coefficients(tree, inst)
    solve = get_lp_solver(lp_solver)
    y, u = {}, {}
    for n in tree.ids:
        par = tree.parent(n)
        mip = _node_lp(inst, tree, n, cum[n], None if par is None else eta[par], coef.c[n], coef.alpha[n])
        res = solve(mip)
        if not res.ok:
            raise ApproxError(f"flow subproblem at node {n} ended {res.status.value}")
        y[n] = np.array([[max(res.value(("y", i, j)), 0.0) for j in range(inst.N)] for i in range(inst.M)])
        if par is not None:
            u[n] = max(res.value(("u",)), 0.0)
    return y, u


def _delta(a: dict, b: dict) -> float:
    return max((float(np.max(np.abs(np.asarray(a[k]) - np.asarray(b[k])), initial=0.0)) for k in a), default=0.0)


def _run(model: Model, closed_form, eps: float, max_iter: int, lp_solver: str) -> ApproxTrace:
    start = time.perf_counter()
    inst, tree = model.instance, model.tree
    bound = ratio_bound(inst, tree)
    lp = model.solve_lp(lp_solver)
    if not lp.ok:
        raise ApproxError(f"LP relaxation ended {lp.status.value}")
    sol = extract_solution(model, lp)
    if _is_integral(sol):
        x = {n: np.round(v) for n, v in sol.x.items()}
        return ApproxTrace([lp.objective], x, sol.eta, sol.y, sol.u, 0, Termination.INTEGRAL_LP, bound,
                           lp.objective, [model.mip.max_violation(lp.x)], wall_time=time.perf_counter() - start)
    x, eta, y, u = sol.x, sol.eta, sol.y, sol.u
    objectives, residuals = [], []
    reason = Termination.ITER_CAP
    k = 0
    while k < max_iter:
        sub = closed_form(FlowFixing(y, u), inst, tree, tol=LP_UTIL_TOL)
        y_new, u_new = _flows_step(model, sub.cum, sub.eta, lp_solver)
        vec = model.vector(x=sub.x, y=y_new, eta=sub.eta, u=u_new)
        objectives.append(model.mip.evaluate(vec))
        residuals.append(model.mip.max_violation(vec))
        deltas = (_delta(sub.x, x), _delta(sub.eta, eta), _delta(y_new, y), _delta(u_new, u))
        x, eta, y, u = sub.x, sub.eta, y_new, u_new
        k += 1
        if max(deltas) < eps:
            reason = Termination.CONVERGED
            break
    return ApproxTrace(objectives, x, eta, y, u, k, reason, bound, lp.objective, residuals,
                       wall_time=time.perf_counter() - start)


def approx_multistage(instance: Instance, tree: ScenarioTree, eps: float = 1e-6, max_iter: int = 100,
                      lp_solver: str = "bundled") -> ApproxTrace:
    """Heuristic for the multistage model: openings follow path maxima of rounded-up utilization."""
    return _run(build_multistage(instance, tree), sp_rms, eps, max_iter, lp_solver)


def approx_two_stage(instance: Instance, tree: ScenarioTree, eps: float = 1e-6, max_iter: int = 100,
                     lp_solver: str = "bundled") -> ApproxTrace:
    """Heuristic for the two-stage model: openings follow stage-wide maxima."""
    return _run(build_two_stage(instance, tree, transformed=True), sp_rts, eps, max_iter, lp_solver)
