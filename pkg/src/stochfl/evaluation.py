"""Out-of-sample rolling-horizon tests and parameter sweeps.

Rolling horizon: solve on a forecast tree, implement only the current
priority list against one realized stage, then (multistage policy)
re-forecast the remaining stages from the new state and re-solve.  The
two-stage policy keeps its first list throughout.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .bounds import compute_report
from .approx import approx_multistage
from .instance import GridConfig, Instance, RiskParams, generate_grid_instance
from .lp_core import INF, MixedIntegerProgram, get_solver
from .models import build_multistage, build_prioritized, build_two_stage, extract_solution
from .scenario_tree import ScenarioTree, TreeKind, TreeMode, _draw, budget_floor, build_tree


class EvaluationError(RuntimeError):
    pass


class StageInfeasible(EvaluationError):
    pass


class Policy(str, enum.Enum):
    TWO_STAGE = "TwoStagePrior"
    MULTISTAGE = "MultistagePrior"


def nearest_rank(values, q: float) -> float:
    """Nearest-rank percentile: the ceil(q/100 * n)-th smallest value."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        return math.nan
    if not 0 < q <= 100:
        raise ValueError("percentile must lie in (0, 100]")
    return float(v[max(1, math.ceil(q / 100.0 * v.size)) - 1])


def seed_for(master_seed: int, *path: int) -> np.random.SeedSequence:
    """Independent, reproducible stream for (master seed, role, index, ...)."""
    return np.random.SeedSequence([int(master_seed), *map(int, path)])


def priority_order(S: np.ndarray) -> list[int]:
    """Sites sorted by how many others they precede (ties by index)."""
    wins = S.sum(axis=1)
    return sorted(range(S.shape[0]), key=lambda i: (-wins[i], i))


# ---------------------------------------------------------------------------
# single-stage implementation
# ---------------------------------------------------------------------------

@dataclass
class StageOutcome:
    opened: np.ndarray
    flows: np.ndarray
    cost: float


def per_stage_implementation(s: np.ndarray, demand, budget: int, open_set, instance: Instance, t: int,
                             solver: str = "highs") -> StageOutcome:
    """Open at most ``budget`` new sites consistent with list ``s`` and route demand at least cost.

    ``s[i, k] = 1`` means site ``i`` may not stay closed while ``k`` is open.
    """
    M, N = instance.M, instance.N
    demand = np.asarray(demand, dtype=float)
    have = np.asarray(open_set, dtype=float)
    mip = MixedIntegerProgram(f"stage{t}")
    x = [mip.add_var(f"x{i}", 0.0, 0.0 if have[i] > 0.5 else 1.0, integer=True) for i in range(M)]
    y = {(i, j): mip.add_var(f"y{i},{j}", 0.0, INF, obj=float(instance.c[t - 1, i, j]))
         for i in range(M) for j in range(N)}
    mip.add_constraint({col: 1.0 for col in x}, "<=", float(budget), "budget")
    for j in range(N):
        mip.add_constraint({y[(i, j)]: 1.0 for i in range(M)}, "=", float(demand[j]))
    for i in range(M):
        terms = [(y[(i, j)], 1.0) for j in range(N)] + [(x[i], -float(instance.h[t - 1, i]))]
        mip.add_constraint(terms, "<=", float(instance.h[t - 1, i] * have[i]))
    for i in range(M):
        for k in range(M):
            if i != k and s[i, k] > 0.5:
                # cum_i >= cum_k + s_ik - 1 with cum = have + x
                mip.add_constraint({x[i]: 1.0, x[k]: -1.0}, ">=", float(have[k] - have[i]))
    res = get_solver(solver)(mip)
    if res.x is None or not res.ok:
        raise StageInfeasible(f"stage {t}: no priority-consistent opening covers demand {demand.sum():.6g}")
    new = np.round(res.x[x])
    flows = np.array([[res.x[y[(i, j)]] for j in range(N)] for i in range(M)])
    return StageOutcome(new, flows, float(np.sum(instance.c[t - 1] * flows)))


# ---------------------------------------------------------------------------
# rolling horizon
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RollingConfig:
    C: int = 2
    kind: str = "sd"
    solver: str = "highs"
    time_limit: float | None = None


@dataclass
class RollingResult:
    policy: str
    master_seed: int
    costs: list[float]
    infeasible: int
    first_list: list[int]
    lists: list[list[list[int]]] = field(default_factory=list)
    solve_times: list[float] = field(default_factory=list)

    @property
    def n_paths(self) -> int:
        return len(self.costs) + self.infeasible

    @property
    def mean(self) -> float:
        return float(np.mean(self.costs)) if self.costs else math.nan

    @property
    def p95(self) -> float:
        return nearest_rank(self.costs, 95)

    @property
    def p75(self) -> float:
        return nearest_rank(self.costs, 75)

    @property
    def in_sample_time(self) -> float:
        return float(np.mean(self.solve_times)) if self.solve_times else 0.0


def tail_instance(instance: Instance, t: int) -> Instance:
    """The same instance restricted to stages t..T (renumbered from 1)."""
    if not 1 <= t <= instance.T:
        raise EvaluationError(f"stage {t} outside 1..{instance.T}")
    k = t - 1
    risk = RiskParams(tuple(instance.risk.lam[k:]), tuple(instance.risk.alpha[k:]))
    mean = None if instance.demand_mean is None else instance.demand_mean[k:]
    std = None if instance.demand_std is None else instance.demand_std[k:]
    return Instance(instance.f[k:], instance.c[k:], instance.h[k:], risk, mean, std, instance.coords,
                    dict(instance.meta))


def sample_path(instance: Instance, floors: dict[int, int], seed) -> tuple[np.ndarray, list[int]]:
    """One out-of-sample (demand, budget) path from the in-sample distributions."""
    rng = np.random.Generator(np.random.PCG64(seed))
    d = np.array([_draw(rng, instance, t) for t in range(1, instance.T + 1)])
    F = [int(rng.integers(floors[t], floors[t] + 2)) for t in range(1, instance.T + 1)]
    return d, F


def _root_list(instance: Instance, tree: ScenarioTree, multistage: bool, cfg: RollingConfig, opened=None):
    model = build_prioritized(instance, tree, multistage=multistage, transformed=True, opened=opened)
    opts = {} if cfg.time_limit is None else {"time_limit": cfg.time_limit}
    res = model.solve(cfg.solver, **opts)
    if res.x is None:
        raise EvaluationError(f"in-sample prioritized solve ended {res.status.value}")
    sol = extract_solution(model, res)
    return sol.s[tree.root], res.wall_time


def rolling_horizon(instance: Instance, config: RollingConfig, policy: Policy | str, n_paths: int,
                    master_seed: int, reality: Instance | None = None) -> RollingResult:
    """Simulate ``n_paths`` realized paths under one policy.

    ``reality`` optionally supplies different demand distributions for the
    realized paths (same costs assumed); by default paths come from ``instance``.
    """
    policy = Policy(policy)
    reality = instance if reality is None else reality
    if not instance.equal_cost_sites():
        raise EvaluationError("rolling horizon needs a prioritized instance (equal site costs and capacities)")
    if n_paths < 1:
        raise EvaluationError("n_paths must be positive")
    forecast = build_tree(config.kind, instance, config.C, seed_for(master_seed, 0, 0), TreeMode.DEMAND_AND_BUDGET)
    h = float(instance.h[0, 0])
    floors = budget_floor(forecast, h)
    S0, t0 = _root_list(instance, forecast, policy is Policy.MULTISTAGE, config)
    result = RollingResult(policy.value, int(master_seed), [], 0, priority_order(S0), solve_times=[t0])
    T = instance.T
    for p in range(n_paths):
        d, F = sample_path(reality, floors, seed_for(master_seed, 1, p))
        opened = np.zeros(instance.M)
        S = S0
        lists = [priority_order(S0)]
        cost = 0.0
        try:
            for t in range(1, T + 1):
                if t > 1 and policy is Policy.MULTISTAGE:
                    sub = tail_instance(instance, t)
                    tree = build_tree(config.kind, sub, config.C, seed_for(master_seed, 2, p, t),
                                      TreeMode.DEMAND_AND_BUDGET)
                    S, dt = _root_list(sub, tree, True, config, opened=opened)
                    result.solve_times.append(dt)
                    lists.append(priority_order(S))
                out = per_stage_implementation(S, d[t - 1], F[t - 1], opened, instance, t, config.solver)
                opened = opened + out.opened
                cost += out.cost
        except StageInfeasible:
            result.infeasible += 1
            continue
        result.costs.append(cost)
        result.lists.append(lists)
    return result


ROLLING_COLUMNS = ("lambda", "policy", "p95", "p75", "mean", "s0", "time", "n_paths", "infeasible")


def rolling_table(instance: Instance, lambdas, n_paths: int, master_seed: int,
                  config: RollingConfig | None = None) -> list[dict]:
    """Rows in the layout: lambda, policy, 95th and 75th percentiles, mean, first list, solve time."""
    config = config or RollingConfig()
    rows = []
    for lam in lambdas:
        inst = instance.with_risk(lam=lam)
        for policy in (Policy.TWO_STAGE, Policy.MULTISTAGE):
            r = rolling_horizon(inst, config, policy, n_paths, master_seed)
            rows.append({"lambda": lam, "policy": policy.value, "p95": r.p95, "p75": r.p75, "mean": r.mean,
                         "s0": "-".join(str(i) for i in r.first_list), "time": r.in_sample_time,
                         "n_paths": r.n_paths, "infeasible": r.infeasible})
    return rows


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

AXES = ("C", "T", "lambda", "sigma", "M", "N")
METRICS = ("rvms", "rgap", "ratio", "time")


@dataclass(frozen=True)
class SweepConfig:
    T: int = 3
    M: int = 6
    N: int = 10
    C: int = 2
    lam: float = 0.5
    sigma: float = 0.8
    mode: str = "R"
    solver: str = "highs"
    grid: GridConfig = GridConfig()


@dataclass
class SweepResult:
    axis: str
    metric: str
    seeds: list[int]
    rows: list[dict]

    COLUMNS = ("axis", "value", "tree_kind", "metric", "mean", "n", "failures")

    def means(self, kind: str | None = None) -> dict:
        return {r["value"]: r["mean"] for r in self.rows if kind is None or r["tree_kind"] == kind}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=self.COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: (repr(r[k]) if isinstance(r[k], float) else r[k]) for k in self.COLUMNS})
        return buf.getvalue()


def with_sigma(instance: Instance, sigma: float) -> Instance:
    """Same means, standard deviations rescaled to ``sigma`` times the mean."""
    return Instance(instance.f, instance.c, instance.h, instance.risk, instance.demand_mean,
                    sigma * instance.demand_mean, instance.coords, dict(instance.meta))


def relative_vms(instance: Instance, tree: ScenarioTree, mode: str = "R", solver: str = "highs",
                 rel_gap: float = 1e-9) -> float:
    """(z_ts - z_ms) / z_ms without the bound computations."""
    if mode == "R":
        ts, ms = build_two_stage(instance, tree), build_multistage(instance, tree)
    else:
        ts = build_prioritized(instance, tree, multistage=False)
        ms = build_prioritized(instance, tree, multistage=True)
    z = []
    for model in (ts, ms):
        res = model.solve(solver, rel_gap=rel_gap)
        if not res.ok:
            raise EvaluationError(f"{model.kind.value} solve ended {res.status.value}")
        z.append(res.objective)
    return (z[0] - z[1]) / z[1]


def _point(axis: str, value, seed: int, kind: str, cfg: SweepConfig):
    params = {"T": cfg.T, "M": cfg.M, "N": cfg.N, "C": cfg.C, "lambda": cfg.lam, "sigma": cfg.sigma}
    params[axis] = value
    inst = generate_grid_instance(seed, int(params["T"]), int(params["M"]), int(params["N"]), cfg.grid)
    inst = with_sigma(inst, float(params["sigma"])).with_risk(lam=float(params["lambda"]))
    mode = TreeMode.DEMAND_AND_BUDGET if cfg.mode == "P" else TreeMode.DEMAND_ONLY
    tree = build_tree(kind, inst, int(params["C"]), seed, mode)
    return inst, tree


def _metric(metric: str, inst: Instance, tree: ScenarioTree, cfg: SweepConfig) -> float:
    if metric == "rvms":
        return relative_vms(inst, tree, cfg.mode, cfg.solver)
    if metric == "rgap":
        return compute_report(inst, tree, cfg.mode, cfg.solver).rgap
    if metric == "ratio":
        z = build_multistage(inst, tree).solve(cfg.solver, rel_gap=1e-9)
        return approx_multistage(inst, tree).with_optimum(z.objective).empirical_ratio
    start = time.perf_counter()
    relative_vms(inst, tree, cfg.mode, cfg.solver)
    return time.perf_counter() - start


def sweep(axis: str, values, tree_kinds=("sd",), seeds=range(30), metric: str = "rvms",
          config: SweepConfig | None = None) -> SweepResult:
    """Mean of ``metric`` over seeds for each value of one parameter and each tree family."""
    if axis not in AXES:
        raise ValueError(f"unknown axis {axis!r}; choose from {AXES}")
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; choose from {METRICS}")
    kinds = [TreeKind(k).value for k in tree_kinds]
    cfg = config or SweepConfig()
    seeds = [int(s) for s in seeds]
    rows = []
    for value in values:
        for kind in kinds:
            vals, failures = [], 0
            for seed in seeds:
                try:
                    inst, tree = _point(axis, value, seed, kind, cfg)
                    vals.append(_metric(metric, inst, tree, cfg))
                except Exception:  # noqa: BLE001 - per-instance failures are counted, not fatal
                    failures += 1
            rows.append({"axis": axis, "value": value, "tree_kind": kind, "metric": metric,
                         "mean": float(np.mean(vals)) if vals else math.nan, "n": len(vals), "failures": failures})
    return SweepResult(axis, metric, seeds, rows)
