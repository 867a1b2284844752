"""Value of the multistage model over the two-stage one, and lower bounds on it.

The solution-based bounds rebuild both a multistage and a two-stage
location plan from the flows of an optimal two-stage solution and charge
the difference; the parameter-based ones need no MILP solve at all.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .instance import Instance, ceil_guard
from .models import (Model, SolutionTree, build_multistage, build_prioritized, build_two_stage,
                     extract_solution)
from .scenario_tree import ScenarioTree, TreeMode
from .substructure import FlowFixing, fixed_cost_part, sp_pms, sp_pts, sp_rms, sp_rts, utilization

CHAIN_TOL = 1e-6
BOUND_GAP = 1e-9


class BoundsError(ValueError):
    pass


def _lam_next(instance: Instance, t: int) -> float:
    """Risk weight of the stage after ``t``."""
    return float(instance.risk.lam[t])


def _lam(instance: Instance, t: int) -> float:
    return float(instance.risk.lam[t - 1])


# ---------------------------------------------------------------------------
# unprioritized
# ---------------------------------------------------------------------------

def vms_r_lb(ts_solution: SolutionTree, instance: Instance, tree: ScenarioTree) -> float:
    """Gap between the two-stage and multistage location plans rebuilt from optimal two-stage flows."""
    fixing = FlowFixing.from_solution(ts_solution)
    ms = sp_rms(fixing, instance, tree)
    ts = sp_rts(fixing, instance, tree)
    value = 0.0
    for n in tree.ids:
        t = tree.stage(n)
        if n != tree.root:
            value += tree.p(n) * (1.0 - _lam(instance, t)) * float(instance.f[t - 1] @ (ts.cum[n] - ms.cum[n]))
        if not tree.is_leaf(n):
            value += tree.p(n) * _lam_next(instance, t) * (ts.eta[n] - ms.eta[n])
    rebuilt = fixed_cost_part(fixing, instance, tree) + ts.objective
    if abs(rebuilt - ts_solution.objective) > CHAIN_TOL * max(1.0, abs(ts_solution.objective)):
        warnings.warn(f"two-stage solution objective {ts_solution.objective:.10g} differs from its rebuilt "
                      f"value {rebuilt:.10g}; the bound is not certified", RuntimeWarning)
    return value


def vms_r_lb1(instance: Instance, tree: ScenarioTree, solver: str = "bundled") -> float:
    """Bound from the LP relaxation of the two-stage model; no integer solve needed."""
    model = build_two_stage(instance, tree, transformed=True)
    res = model.solve_lp(solver)
    if not res.ok:
        raise BoundsError(f"LP relaxation of the two-stage model ended {res.status.value}")
    sol = extract_solution(model, res)
    return lb1_from_lp(sol, instance, tree)


def lb1_from_lp(lp: SolutionTree, instance: Instance, tree: ScenarioTree) -> float:
    B = {n: np.minimum(utilization(instance, tree, lp.y[n], n), 1.0) for n in tree.ids}
    u = {n: lp.u.get(n, 0.0) for n in tree.ids}
    peak = {t: np.max([B[n] for n in tree.stage_nodes(t)], axis=0) for t in tree.stages}
    cum_ms, cum_ts = {}, {}
    for t in tree.stages:
        for n in tree.stage_nodes(t):
            par = tree.parent(n)
            own_ms, own_ts = ceil_guard(B[n]), (B[n] if par is None else peak[t])
            cum_ms[n] = own_ms if par is None else np.maximum(cum_ms[par], own_ms)
            cum_ts[n] = own_ts if par is None else np.maximum(cum_ts[par], own_ts)

    def stage_cost(m, cum):
        t = tree.stage(m)
        return float(instance.f[t - 1] @ cum[m] + np.sum(instance.c[t - 1] * lp.y[m]) - u[m])

    root = tree.root
    t1 = tree.stage(root)
    value = float(instance.f[t1 - 1] @ (B[root] - ceil_guard(B[root])))
    for n in tree.ids:
        t = tree.stage(n)
        if n != root:
            value += tree.p(n) * (1.0 - _lam(instance, t)) * float(instance.f[t - 1] @ (cum_ts[n] - cum_ms[n]))
        if not tree.is_leaf(n):
            eta_ms = max(stage_cost(m, cum_ms) for m in tree.children(n))
            eta_ts = max(stage_cost(m, cum_ts) for m in tree.stage_nodes(t + 1))
            value += tree.p(n) * _lam_next(instance, t) * (eta_ts - eta_ms)
    return value


def lb2_indicator(instance: Instance, tree: ScenarioTree, exclude_root: bool = False) -> dict[int, np.ndarray]:
    """Per-node 0/1 vector over sites: the site is forced open for the two-stage plan but idle on the path."""
    M = instance.M
    out = {}
    for n in tree.ids:
        if n == tree.root:
            continue
        path = tree.path(n)
        checked = path[1:] if exclude_root else path
        if any(np.any(tree.demand(m) != 0) for m in checked):
            out[n] = np.zeros(M)
            continue
        mates = [k for m in path for k in tree.stage_nodes(tree.stage(m))]
        delta = np.zeros(M)
        for i in range(M):
            for k in mates:
                t = tree.stage(k)
                others = float(instance.h[t - 1].sum() - instance.h[t - 1, i])
                if float(tree.demand(k).sum()) > others:
                    delta[i] = 1.0
                    break
        out[n] = delta
    return out


def vms_r_lb2(instance: Instance, tree: ScenarioTree, exclude_root: bool = False) -> float:
    """Parameter-only bound: sites the two-stage plan must rent on zero-demand paths.

    ``exclude_root`` skips the root when testing for an all-zero path; that
    reading is not a certified bound when the root demand is positive.
    """
    if tree.mode is not TreeMode.DEMAND_ONLY:
        raise BoundsError("parameter bound needs a demand-only tree")
    value = 0.0
    for n, delta in lb2_indicator(instance, tree, exclude_root).items():
        t = tree.stage(n)
        value += tree.p(n) * (1.0 - _lam(instance, t)) * float(instance.f[t - 1] @ delta)
    return value


# ---------------------------------------------------------------------------
# prioritized
# ---------------------------------------------------------------------------

def vms_p_lb(ts_solution: SolutionTree, instance: Instance, tree: ScenarioTree) -> float:
    """Gap between priority lists and VaR levels rebuilt from an optimal two-stage prioritized solution."""
    fixing = FlowFixing.from_solution(ts_solution, with_x=True)
    ms = sp_pms(fixing, instance, tree)
    ts = sp_pts(fixing, instance, tree)
    value = 0.0
    for n in tree.non_leaves():
        t = tree.stage(n)
        value += tree.p(n) * _lam_next(instance, t) * (ts.eta[n] - ms.eta[n])
        if n != tree.root:
            value += tree.p(n) * (1.0 - _lam(instance, t)) * float(ts.s[n].sum() - ms.s[n].sum())
    rebuilt = fixed_cost_part(fixing, instance, tree) + ts.objective
    if abs(rebuilt - ts_solution.objective) > CHAIN_TOL * max(1.0, abs(ts_solution.objective)):
        warnings.warn(f"prioritized two-stage objective {ts_solution.objective:.10g} differs from its rebuilt "
                      f"value {rebuilt:.10g}; the bound is not certified", RuntimeWarning)
    return value


def var_is_maximum(instance: Instance, tree: ScenarioTree) -> bool:
    """True when every stage's alpha puts VaR at the worst scenario: |Omega| < 1 / (1 - alpha)."""
    omega = tree.num_scenarios
    return all(omega * (1.0 - a) < 1.0 for a in instance.risk.alpha)


def vms_p_lb1_raw(instance: Instance, tree: ScenarioTree, assume_u_zero: bool = False) -> float:
    """Demand-spread formula before clipping; negative when flow costs vary across arcs."""
    if tree.mode is not TreeMode.DEMAND_AND_BUDGET:
        raise BoundsError("prioritized bound needs a budget-mode tree")
    if not assume_u_zero and not var_is_maximum(instance, tree):
        raise BoundsError(f"demand-spread bound needs |Omega| < 1/(1 - alpha); have |Omega|={tree.num_scenarios}, "
                          f"alpha={min(instance.risk.alpha)}")
    value = 0.0
    for n in tree.non_leaves():
        t1 = tree.stage(n) + 1
        c = instance.c[t1 - 1]
        stage_peak = max(float(tree.demand(m).sum()) for m in tree.stage_nodes(t1))
        child_peak = max(float(tree.demand(m).sum()) for m in tree.children(n))
        value += tree.p(n) * _lam_next(instance, t1 - 1) * (c.min() * stage_peak - c.max() * child_peak)
    return value


def vms_p_lb1(instance: Instance, tree: ScenarioTree, assume_u_zero: bool = False) -> float:
    """Demand-spread bound, clipped at 0 (the value of multistage is never negative)."""
    return max(0.0, vms_p_lb1_raw(instance, tree, assume_u_zero))


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

@dataclass
class BoundsReport:
    mode: str
    z_ts: float
    z_ms: float
    vms: float
    lb: float
    lb1: float | None = None
    lb2: float | None = None
    rvms: float = 0.0
    rgap: float = 0.0
    certified: bool = True
    status_ts: str = "Optimal"
    status_ms: str = "Optimal"
    time_ts: float = 0.0
    time_ms: float = 0.0
    lb1_raw: float | None = None
    violations: list[str] = field(default_factory=list)

    COLUMNS = ("mode", "z_ts", "z_ms", "vms", "lb", "lb1", "lb2", "rvms", "rgap", "certified",
               "status_ts", "status_ms", "time_ts", "time_ms", "lb1_raw")

    def chain_violations(self, tol: float = CHAIN_TOL) -> list[str]:
        eps = tol * max(1.0, abs(self.z_ts), abs(self.z_ms))
        bad = []
        if self.z_ts < self.z_ms - eps:
            bad.append(f"z_ts {self.z_ts:.10g} < z_ms {self.z_ms:.10g}")
        if self.lb > self.vms + eps:
            bad.append(f"lb {self.lb:.10g} > vms {self.vms:.10g}")
        if self.lb < -eps:
            bad.append(f"lb {self.lb:.10g} < 0")
        if self.mode == "R":
            if self.lb2 is not None and (self.lb2 > self.lb + eps or self.lb2 < -eps):
                bad.append(f"lb2 {self.lb2:.10g} outside [0, lb]")
            if self.lb1 is not None and self.lb1 > self.vms + eps:
                bad.append(f"lb1 {self.lb1:.10g} > vms {self.vms:.10g}")
        elif self.lb1 is not None and (self.lb1 > self.lb + eps or self.lb1 < -eps):
            bad.append(f"lb1 {self.lb1:.10g} outside [0, lb]")
        return bad

    def row(self) -> dict:
        d = asdict(self)
        return {k: d[k] for k in self.COLUMNS}


def relative_gap(vms: float, lb: float, tol: float = 1e-9) -> float:
    """(vms - lb) / vms clipped to [0, 1]; 0 when vms is (numerically) 0."""
    if vms <= tol * max(1.0, abs(lb)):
        return 0.0
    return min(1.0, max(0.0, (vms - lb) / vms))


def _solve(model: Model, solver: str, time_limit: float | None) -> tuple[SolutionTree, str, float, bool]:
    opts = {"rel_gap": BOUND_GAP}
    if time_limit is not None:
        opts["time_limit"] = time_limit
    res = model.solve(solver, **opts)
    if res.x is None:
        raise BoundsError(f"{model.kind.value}: solver ended {res.status.value} without a solution")
    return extract_solution(model, res), res.status.value, res.wall_time, res.ok


def compute_report(instance: Instance, tree: ScenarioTree, mode: str | None = None, solver: str = "highs",
                   time_limit: float | None = None, cuts: bool = False, exclude_root: bool = False,
                   strict: bool = True) -> BoundsReport:
    """Solve both models, evaluate every bound, and check the ordering between them.

    ``mode`` is ``"R"`` (demand-only tree) or ``"P"`` (prioritized, budget tree).
    """
    budget = tree.mode is TreeMode.DEMAND_AND_BUDGET
    mode = mode or ("P" if budget else "R")
    if mode not in ("R", "P"):
        raise BoundsError(f"unknown mode {mode!r}; use 'R' or 'P'")
    if (mode == "P") != budget:
        raise BoundsError(f"mode {mode} does not match a {tree.mode.value}-mode tree")
    if mode == "R":
        ts_model = build_two_stage(instance, tree, transformed=True)
        ms_model = build_multistage(instance, tree)
    else:
        ts_model = build_prioritized(instance, tree, multistage=False, transformed=True, cuts=cuts)
        ms_model = build_prioritized(instance, tree, multistage=True, cuts=cuts)
    ts, st_ts, t_ts, ok_ts = _solve(ts_model, solver, time_limit)
    ms, st_ms, t_ms, ok_ms = _solve(ms_model, solver, time_limit)
    vms = ts.objective - ms.objective
    lb1_raw = None
    if mode == "R":
        lb = vms_r_lb(ts, instance, tree)
        lb1 = vms_r_lb1(instance, tree, solver)
        lb2 = vms_r_lb2(instance, tree, exclude_root)
    else:
        lb = vms_p_lb(ts, instance, tree)
        lb2 = None
        if var_is_maximum(instance, tree):
            lb1_raw = vms_p_lb1_raw(instance, tree)
            lb1 = max(0.0, lb1_raw)
        else:
            lb1 = None
    rvms = vms / ms.objective if abs(ms.objective) > 0 else 0.0
    rep = BoundsReport(mode, ts.objective, ms.objective, vms, lb, lb1, lb2, rvms, relative_gap(vms, lb),
                       ok_ts and ok_ms, st_ts, st_ms, t_ts, t_ms, lb1_raw)
    rep.violations = rep.chain_violations()
    if strict and rep.certified and rep.violations:
        raise BoundsError("bound ordering violated: " + "; ".join(rep.violations))
    return rep


def reports_to_csv(reports, extra: list[dict] | None = None) -> str:
    """CSV text with one row per report; ``extra`` adds per-row identifying columns."""
    buf = io.StringIO()
    extra = extra or [{} for _ in reports]
    cols = (list(extra[0].keys()) if extra else []) + list(BoundsReport.COLUMNS)
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for rep, ex in zip(reports, extra):
        row = dict(ex)
        row.update({k: _fmt(v) for k, v in rep.row().items()})
        w.writerow(row)
    return buf.getvalue()


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return v
