"""Builders that turn (instance, tree) into MILPs for every formulation.

Column handles follow the pattern ``(node, role, *indices)`` with roles
``"x"`` (site opened at the node), ``"y"`` (flow), ``"eta"`` (VaR level held
at a non-leaf), ``"u"`` (excess over the parent's VaR level) and ``"s"``
(ordered priority pair).
"""

from __future__ import annotations

import enum
import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from .instance import Instance
from .lp_core import INF, MixedIntegerProgram, SolveResult, get_lp_solver, get_solver
from .risk import ecrm_coefficients
from .scenario_tree import ScenarioTree, TreeMode, chain_tree


class ModelError(ValueError):
    pass


class FormulationKind(str, enum.Enum):
    DETERMINISTIC = "det"
    TWO_STAGE_RISK_AVERSE = "ts-original"
    TWO_STAGE_RISK_AVERSE_TRANSFORMED = "ts"
    MULTISTAGE_RISK_AVERSE = "ms"
    TWO_STAGE_PRIORITIZED = "ts-prior-original"
    TWO_STAGE_PRIORITIZED_TRANSFORMED = "ts-prior"
    MULTISTAGE_PRIORITIZED = "ms-prior"
    DRO_TWO_STAGE = "dro"

    @property
    def prioritized(self) -> bool:
        return self in (FormulationKind.TWO_STAGE_PRIORITIZED, FormulationKind.TWO_STAGE_PRIORITIZED_TRANSFORMED,
                        FormulationKind.MULTISTAGE_PRIORITIZED)


@dataclass
class Model:
    mip: MixedIntegerProgram
    kind: FormulationKind
    instance: Instance
    tree: ScenarioTree | None = None
    info: dict = field(default_factory=dict)

    def solve(self, solver: str = "bundled", **options) -> SolveResult:
        return get_solver(solver)(self.mip, **options)

    def solve_lp(self, solver: str = "bundled") -> SolveResult:
        return get_lp_solver(solver)(self.mip)

    def vector(self, x=None, y=None, eta=None, u=None, s=None) -> np.ndarray:
        """Column vector assembled from per-node parts; unspecified columns stay 0."""
        v = np.zeros(self.mip.num_vars)
        H = self.mip.handles
        for n, arr in (x or {}).items():
            for i, val in enumerate(np.asarray(arr, dtype=float)):
                v[H[(n, "x", i)]] = val
        for n, arr in (y or {}).items():
            for (i, j), val in np.ndenumerate(np.asarray(arr, dtype=float)):
                v[H[(n, "y", i, j)]] = val
        for n, val in (eta or {}).items():
            v[H[(n, "eta")]] = val
        for n, val in (u or {}).items():
            v[H[(n, "u")]] = val
        for n, S in (s or {}).items():
            for i, k in itertools.permutations(range(S.shape[0]), 2):
                v[H[(n, "s", i, k)]] = S[i, k]
        return v


@dataclass
class SolutionTree:
    """Per-node values of a solved tree model."""

    objective: float
    x: dict[int, np.ndarray] = field(default_factory=dict)
    y: dict[int, np.ndarray] = field(default_factory=dict)
    eta: dict[int, float] = field(default_factory=dict)
    u: dict[int, float] = field(default_factory=dict)
    s: dict[int, np.ndarray] = field(default_factory=dict)
    status: str = "Optimal"
    nodes: int = 0
    wall_time: float = 0.0

    def cumulative_x(self, tree: ScenarioTree, n: int) -> np.ndarray:
        return sum((self.x[m] for m in tree.path(n) if m in self.x), np.zeros_like(next(iter(self.x.values()))))


def extract_solution(model: Model, res: SolveResult) -> SolutionTree:
    if res.x is None:
        raise ModelError(f"no solution to extract (status {res.status.value})")
    inst, tree = model.instance, model.tree
    M, N = inst.M, inst.N
    sol = SolutionTree(res.objective, status=res.status.value, nodes=res.nodes, wall_time=res.wall_time)
    h = model.mip.handles
    for n in tree.ids:
        if (n, "x", 0) in h:
            sol.x[n] = np.array([res.x[h[(n, "x", i)]] for i in range(M)])
        if (n, "y", 0, 0) in h:
            sol.y[n] = np.array([[res.x[h[(n, "y", i, j)]] for j in range(N)] for i in range(M)])
        if (n, "eta") in h:
            sol.eta[n] = float(res.x[h[(n, "eta")]])
        if (n, "u") in h:
            sol.u[n] = float(res.x[h[(n, "u")]])
        if M > 1 and (n, "s", 0, 1) in h:
            S = np.zeros((M, M))
            for i, k in itertools.permutations(range(M), 2):
                S[i, k] = res.x[h[(n, "s", i, k)]]
            sol.s[n] = S
    return sol


# ---------------------------------------------------------------------------
# shared pieces
# ---------------------------------------------------------------------------

def _check_tree(tree: ScenarioTree, instance: Instance, budget: bool) -> None:
    want = TreeMode.DEMAND_AND_BUDGET if budget else TreeMode.DEMAND_ONLY
    if tree.mode is not want:
        raise ModelError(f"formulation needs a {want.value}-mode tree, got {tree.mode.value}")
    if tree.num_customers != instance.N:
        raise ModelError(f"tree has {tree.num_customers} customers, instance has {instance.N}")
    last = tree.last_stage
    if last > instance.T:
        raise ModelError(f"tree reaches stage {last} but instance has T={instance.T}")


def _add_xy(mip: MixedIntegerProgram, inst: Instance, n: int) -> None:
    for i in range(inst.M):
        mip.add_var(f"x[{n},{i}]", 0.0, 1.0, integer=True, key=(n, "x", i))
    for i in range(inst.M):
        for j in range(inst.N):
            mip.add_var(f"y[{n},{i},{j}]", 0.0, INF, key=(n, "y", i, j))


def _cum(mip: MixedIntegerProgram, nodes, i: int) -> list[int]:
    return [mip.handles[(m, "x", i)] for m in nodes]


def _add_feasibility(mip: MixedIntegerProgram, inst: Instance, tree: ScenarioTree, n: int, path_nodes) -> None:
    """Demand balance, capacity linked to cumulative openings, open at most once."""
    t = tree.stage(n)
    d = tree.demand(n)
    H = mip.handles
    for j in range(inst.N):
        mip.add_constraint({H[(n, "y", i, j)]: 1.0 for i in range(inst.M)}, "=", float(d[j]), f"dem[{n},{j}]")
    for i in range(inst.M):
        terms = [(H[(n, "y", i, j)], 1.0) for j in range(inst.N)]
        terms += [(c, -float(inst.h[t - 1, i])) for c in _cum(mip, path_nodes, i)]
        mip.add_constraint(terms, "<=", 0.0, f"cap[{n},{i}]")
    for i in range(inst.M):
        mip.add_constraint([(c, 1.0) for c in _cum(mip, path_nodes, i)], "<=", 1.0, f"once[{n},{i}]")


def _flow_terms(mip: MixedIntegerProgram, n: int, cost: np.ndarray, scale: float = 1.0) -> list[tuple[int, float]]:
    H = mip.handles
    M, N = cost.shape
    return [(H[(n, "y", i, j)], scale * float(cost[i, j])) for i in range(M) for j in range(N) if cost[i, j] != 0]


def _tie_stage(mip: MixedIntegerProgram, tree: ScenarioTree, stages, role: str, width: int | None) -> None:
    """Equality of a variable family across all nodes of each listed stage."""
    H = mip.handles
    for t in stages:
        ids = tree.stage_nodes(t)
        first = ids[0]
        for n in ids[1:]:
            if width is None:
                mip.add_constraint({H[(n, role)]: 1.0, H[(first, role)]: -1.0}, "=", 0.0, f"na-{role}[{n}]")
            else:
                for i in range(width):
                    mip.add_constraint({H[(n, role, i)]: 1.0, H[(first, role, i)]: -1.0}, "=", 0.0,
                                       f"na-{role}[{n},{i}]")


# ---------------------------------------------------------------------------
# unprioritized formulations
# ---------------------------------------------------------------------------

def build_deterministic(instance: Instance, demand_path) -> Model:
    """Single-path model: rental on cumulative openings plus flow cost."""
    demands = np.asarray(demand_path, dtype=float)
    if demands.shape != (instance.T, instance.N):
        raise ModelError(f"demand path must be T x N = {(instance.T, instance.N)}")
    tree = chain_tree(list(demands))
    mip = MixedIntegerProgram("deterministic")
    for n in tree.ids:
        _add_xy(mip, instance, n)
    for n in tree.ids:
        t = tree.stage(n)
        path = tree.path(n)
        for i in range(instance.M):
            for col in _cum(mip, path, i):
                mip.add_objective(col, float(instance.f[t - 1, i]))
        for col, v in _flow_terms(mip, n, instance.c[t - 1]):
            mip.add_objective(col, v)
        _add_feasibility(mip, instance, tree, n, path)
    return Model(mip, FormulationKind.DETERMINISTIC, instance, tree)


def build_multistage(instance: Instance, tree: ScenarioTree) -> Model:
    """Extensive form of the nested mean-CVaR multistage model."""
    _check_tree(tree, instance, budget=False)
    coef = ecrm_coefficients(tree, instance)
    mip = MixedIntegerProgram("multistage")
    for n in tree.ids:
        _add_xy(mip, instance, n)
        if not tree.is_leaf(n):
            mip.add_var(f"eta[{n}]", -INF, INF, key=(n, "eta"))
        if n != tree.root:
            mip.add_var(f"u[{n}]", 0.0, INF, key=(n, "u"))
    H = mip.handles
    for n in tree.ids:
        p = tree.p(n)
        path = tree.path(n)
        for i in range(instance.M):
            w = p * coef.f[n][i]
            for col in _cum(mip, path, i):
                mip.add_objective(col, w)
        for col, v in _flow_terms(mip, n, coef.c[n], p):
            mip.add_objective(col, v)
        if not tree.is_leaf(n):
            mip.add_objective(H[(n, "eta")], p * coef.lam[n])
        if n != tree.root:
            mip.add_objective(H[(n, "u")], p * coef.alpha[n])
        _add_feasibility(mip, instance, tree, n, path)
        if n != tree.root:
            t = tree.stage(n)
            terms = [(H[(n, "u")], 1.0), (H[(tree.parent(n), "eta")], 1.0)]
            for i in range(instance.M):
                terms += [(col, -float(instance.f[t - 1, i])) for col in _cum(mip, path, i)]
            terms += _flow_terms(mip, n, instance.c[t - 1], -1.0)
            mip.add_constraint(terms, ">=", 0.0, f"risk[{n}]")
    return Model(mip, FormulationKind.MULTISTAGE_RISK_AVERSE, instance, tree)


def build_two_stage(instance: Instance, tree: ScenarioTree, transformed: bool = True) -> Model:
    """Two-stage model: openings fixed per stage before any demand is revealed."""
    if transformed:
        model = build_multistage(instance, tree)
        mip = model.mip
        mip.name = "two-stage-transformed"
        _tie_stage(mip, tree, tree.stages, "x", instance.M)
        _tie_stage(mip, tree, [t for t in tree.stages if t < tree.last_stage], "eta", None)
        model.kind = FormulationKind.TWO_STAGE_RISK_AVERSE_TRANSFORMED
        return model

    _check_tree(tree, instance, budget=False)
    risk = instance.risk
    mip = MixedIntegerProgram("two-stage")
    for n in tree.ids:
        _add_xy(mip, instance, n)
        if n != tree.root:
            mip.add_var(f"eta[{n}]", -INF, INF, key=(n, "eta"))
            mip.add_var(f"u[{n}]", 0.0, INF, key=(n, "u"))
    H = mip.handles
    for n in tree.ids:
        p = tree.p(n)
        t = tree.stage(n)
        path = tree.path(n)
        for i in range(instance.M):
            for col in _cum(mip, path, i):
                mip.add_objective(col, p * float(instance.f[t - 1, i]))
        if n == tree.root:
            for col, v in _flow_terms(mip, n, instance.c[t - 1]):
                mip.add_objective(col, v)
        else:
            lt, at = risk.lam[t - 1], risk.alpha[t - 1]
            for col, v in _flow_terms(mip, n, instance.c[t - 1], p * (1.0 - lt)):
                mip.add_objective(col, v)
            mip.add_objective(H[(n, "eta")], p * lt)
            mip.add_objective(H[(n, "u")], p * lt / (1.0 - at))
            terms = [(H[(n, "u")], 1.0), (H[(n, "eta")], 1.0)] + _flow_terms(mip, n, instance.c[t - 1], -1.0)
            mip.add_constraint(terms, ">=", 0.0, f"risk[{n}]")
        _add_feasibility(mip, instance, tree, n, path)
    _tie_stage(mip, tree, tree.stages, "x", instance.M)
    _tie_stage(mip, tree, [t for t in tree.stages if t > tree.first_stage], "eta", None)
    return Model(mip, FormulationKind.TWO_STAGE_RISK_AVERSE, instance, tree)


# ---------------------------------------------------------------------------
# prioritized formulations
# ---------------------------------------------------------------------------

def _check_prioritized(instance: Instance, tree: ScenarioTree) -> None:
    _check_tree(tree, instance, budget=True)
    if not instance.equal_cost_sites():
        raise ModelError("prioritized models assume every candidate site has the same setup cost "
                         "and capacity within a stage")
    if instance.M < 2:
        raise ModelError("prioritization needs at least two candidate sites")


def _pairs(M: int):
    return list(itertools.permutations(range(M), 2))


def _add_priority_block(mip: MixedIntegerProgram, instance: Instance, tree: ScenarioTree,
                        with_pair_rows: bool, cycles: bool, opened=None) -> None:
    """Priority variables and the ordering, budget and flow constraints shared by all prioritized models.

    ``opened`` marks sites already open before the tree starts; they enter as
    root openings pinned to 1 and count toward every cumulative sum.
    """
    M = instance.M
    H = mip.handles
    root = tree.root
    if opened is not None:
        for i, v in enumerate(np.asarray(opened, dtype=float)):
            mip.add_var(f"x[{root},{i}]", v, v, integer=True, key=(root, "x", i))
    skip = 0 if opened is not None else 1
    for n in tree.ids:
        if not tree.is_leaf(n):
            for i, k in _pairs(M):
                mip.add_var(f"s[{n},{i},{k}]", 0.0, 1.0, integer=True, key=(n, "s", i, k))
        if n != root:
            _add_xy(mip, instance, n)
    for n in tree.ids:
        path = tree.path(n)[skip:]
        if not tree.is_leaf(n):
            for i, k in itertools.combinations(range(M), 2):
                terms = [(H[(n, "s", i, k)], 1.0), (H[(n, "s", k, i)], 1.0)]
                if n != root:
                    if not with_pair_rows:
                        continue
                    terms += [(c, 1.0) for c in _cum(mip, path, i)] + [(c, 1.0) for c in _cum(mip, path, k)]
                mip.add_constraint(terms, ">=", 1.0, f"pair[{n},{i},{k}]")
            if cycles:
                for i, k in itertools.combinations(range(M), 2):
                    mip.add_constraint({H[(n, "s", i, k)]: 1.0, H[(n, "s", k, i)]: 1.0}, "<=", 1.0)
                for a, b, c in itertools.permutations(range(M), 3):
                    if a < b and a < c:
                        mip.add_constraint({H[(n, "s", a, b)]: 1.0, H[(n, "s", b, c)]: 1.0,
                                            H[(n, "s", c, a)]: 1.0}, "<=", 2.0)
        if n == root:
            continue
        par = tree.parent(n)
        for i, k in _pairs(M):
            terms = [(c, 1.0) for c in _cum(mip, path, i)] + [(c, -1.0) for c in _cum(mip, path, k)]
            terms.append((H[(par, "s", i, k)], -1.0))
            mip.add_constraint(terms, ">=", -1.0, f"order[{n},{i},{k}]")
        mip.add_constraint({H[(n, "x", i)]: 1.0 for i in range(M)}, "<=", float(tree.budget(n)), f"budget[{n}]")
        _add_feasibility(mip, instance, tree, n, path)


def _pair_sum(mip: MixedIntegerProgram, n: int, M: int, scale: float = 1.0) -> list[tuple[int, float]]:
    return [(mip.handles[(n, "s", i, k)], scale) for i, k in _pairs(M)]


def build_prioritized(instance: Instance, tree: ScenarioTree, multistage: bool = True,
                      transformed: bool = True, cuts: bool = False, cycles: bool = False,
                      opened=None) -> Model:
    """Prioritized model: multistage, two-stage transformed, or two-stage original.

    ``opened`` (0/1 per site) starts the tree with those sites already open.
    """
    _check_prioritized(instance, tree)
    if opened is not None and len(opened) != instance.M:
        raise ModelError(f"opened has {len(opened)} entries, instance has M={instance.M}")
    M = instance.M
    root = tree.root
    mip = MixedIntegerProgram("prioritized")
    original = (not multistage) and (not transformed)
    _add_priority_block(mip, instance, tree, with_pair_rows=True, cycles=cycles, opened=opened)
    H = mip.handles
    if original:
        for n in tree.ids:
            if n != root:
                mip.add_var(f"eta[{n}]", -INF, INF, key=(n, "eta"))
                mip.add_var(f"u[{n}]", 0.0, INF, key=(n, "u"))
        risk = instance.risk
        for n in tree.ids:
            p = tree.p(n)
            if not tree.is_leaf(n):
                for col, v in _pair_sum(mip, n, M, p):
                    mip.add_objective(col, v)
            if n == root:
                continue
            t = tree.stage(n)
            lt, at = risk.lam[t - 1], risk.alpha[t - 1]
            for col, v in _flow_terms(mip, n, instance.c[t - 1], p * (1.0 - lt)):
                mip.add_objective(col, v)
            mip.add_objective(H[(n, "u")], p * lt / (1.0 - at))
            mip.add_objective(H[(n, "eta")], p * lt)
            terms = [(H[(n, "u")], 1.0), (H[(n, "eta")], 1.0)] + _flow_terms(mip, n, instance.c[t - 1], -1.0)
            mip.add_constraint(terms, ">=", 0.0, f"risk[{n}]")
        _tie_s(mip, tree, M)
        _tie_stage(mip, tree, [t for t in tree.stages if t >= 1], "eta", None)
        kind = FormulationKind.TWO_STAGE_PRIORITIZED
    else:
        coef = ecrm_coefficients(tree, instance)
        for n in tree.ids:
            if not tree.is_leaf(n):
                mip.add_var(f"eta[{n}]", -INF, INF, key=(n, "eta"))
            if n != root:
                mip.add_var(f"u[{n}]", 0.0, INF, key=(n, "u"))
        for n in tree.ids:
            p = tree.p(n)
            if not tree.is_leaf(n):
                mip.add_objective(H[(n, "eta")], p * coef.lam[n])
                for col, v in _pair_sum(mip, n, M, p * coef.one[n]):
                    mip.add_objective(col, v)
            if n == root:
                continue
            t = tree.stage(n)
            for col, v in _flow_terms(mip, n, coef.c[n], p):
                mip.add_objective(col, v)
            mip.add_objective(H[(n, "u")], p * coef.alpha[n])
            terms = [(H[(n, "u")], 1.0), (H[(tree.parent(n), "eta")], 1.0)]
            terms += _flow_terms(mip, n, instance.c[t - 1], -1.0)
            if not tree.is_leaf(n):
                terms += _pair_sum(mip, n, M, -1.0)
            mip.add_constraint(terms, ">=", 0.0, f"risk[{n}]")
        if multistage:
            kind = FormulationKind.MULTISTAGE_PRIORITIZED
        else:
            _tie_s(mip, tree, M)
            _tie_stage(mip, tree, [t for t in tree.stages if t < tree.last_stage], "eta", None)
            kind = FormulationKind.TWO_STAGE_PRIORITIZED_TRANSFORMED
    model = Model(mip, kind, instance, tree)
    if cuts:
        rows = add_prioritization_cuts(model)
        model.info["cuts"] = rows
    return model


def _tie_s(mip: MixedIntegerProgram, tree: ScenarioTree, M: int) -> None:
    H = mip.handles
    root = tree.root
    for n in tree.non_leaves():
        if n == root:
            continue
        for i, k in _pairs(M):
            mip.add_constraint({H[(n, "s", i, k)]: 1.0, H[(root, "s", i, k)]: -1.0}, "=", 0.0, f"na-s[{n},{i},{k}]")


@dataclass(frozen=True)
class Cut:
    """Cumulative openings at ``high`` dominate those at sibling ``low`` for site ``site``."""

    high: int
    low: int
    site: int


def prioritization_cuts(tree: ScenarioTree, M: int) -> list[Cut]:
    """Sibling-dominance cuts: a sibling with no smaller budget opens a superset of sites."""
    if tree.mode is not TreeMode.DEMAND_AND_BUDGET:
        raise ModelError("prioritization cuts need a budget-mode tree")
    out = []
    for n in tree.ids:
        kids = tree.children(n)
        for a, b in itertools.permutations(kids, 2):
            if tree.budget(a) >= tree.budget(b):
                out.extend(Cut(a, b, i) for i in range(M))
    return out


def add_prioritization_cuts(model: Model) -> int:
    mip, tree = model.mip, model.tree
    cuts = prioritization_cuts(tree, model.instance.M)
    for cut in cuts:
        hi = _cum(mip, tree.path(cut.high)[1:], cut.site)
        lo = _cum(mip, tree.path(cut.low)[1:], cut.site)
        terms = [(c, 1.0) for c in hi] + [(c, -1.0) for c in lo]
        mip.add_constraint(terms, ">=", 0.0, f"cut[{cut.high},{cut.low},{cut.site}]")
    return len(cuts)


# ---------------------------------------------------------------------------
# distributionally robust two-stage model
# ---------------------------------------------------------------------------

def build_dro_two_stage(instance: Instance, samples, epsilon: float) -> Model:
    """Worst case over an infinity-Wasserstein ball (1-norm) around K demand samples.

    One transportation block per (sample k, stage t_hat, customer j_hat, sign r),
    with demand at (t_hat, j_hat) moved by r * epsilon.
    """
    if epsilon < 0:
        raise ModelError("epsilon must be nonnegative")
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 3 or samples.shape[1:] != (instance.T, instance.N):
        raise ModelError(f"samples must be K x T x N with T={instance.T}, N={instance.N}")
    K = samples.shape[0]
    if K < 1:
        raise ModelError("need at least one sample")
    T, M, N = instance.T, instance.M, instance.N
    mip = MixedIntegerProgram("dro")
    for t in range(T):
        for i in range(M):
            mip.add_var(f"x[{t + 1},{i}]", 0.0, 1.0, integer=True, key=("x", t + 1, i))
    for k in range(K):
        mip.add_var(f"eta[{k}]", -INF, INF, obj=1.0 / K, key=("eta", k))
    H = mip.handles
    for t in range(T):
        for i in range(M):
            w = float(instance.f[t, i])
            for tau in range(t + 1):
                mip.add_objective(H[("x", tau + 1, i)], w)
            mip.add_constraint([(H[("x", tau + 1, i)], 1.0) for tau in range(t + 1)], "<=", 1.0, f"once[{t + 1},{i}]")
    clamped = 0
    blocks = 0
    for k in range(K):
        for th in range(T):
            for jh in range(N):
                for r in (-1, 1):
                    blocks += 1
                    key = (th + 1, jh, r, k)
                    cols = {}
                    for t in range(T):
                        for i in range(M):
                            for j in range(N):
                                cols[(t, i, j)] = mip.add_var(f"beta{key}[{t + 1},{i},{j}]", 0.0, INF,
                                                              key=("beta",) + key + (t + 1, i, j))
                    for t in range(T):
                        for j in range(N):
                            dem = samples[k, t, j] + (epsilon * r if (t, j) == (th, jh) else 0.0)
                            if dem < 0:
                                clamped += 1
                                dem = 0.0
                            mip.add_constraint({cols[(t, i, j)]: 1.0 for i in range(M)}, "=", dem)
                        for i in range(M):
                            terms = [(cols[(t, i, j)], 1.0) for j in range(N)]
                            terms += [(H[("x", tau + 1, i)], -float(instance.h[t, i])) for tau in range(t + 1)]
                            mip.add_constraint(terms, "<=", 0.0)
                    terms = [(H[("eta", k)], 1.0)]
                    terms += [(cols[(t, i, j)], -float(instance.c[t, i, j]))
                              for t in range(T) for i in range(M) for j in range(N)]
                    mip.add_constraint(terms, ">=", 0.0, f"epi{key}")
    if clamped:
        warnings.warn(f"{clamped} perturbed demands fell below zero and were clamped to 0", RuntimeWarning)
    return Model(mip, FormulationKind.DRO_TWO_STAGE, instance, None, {"blocks": blocks, "K": K, "clamped": clamped})


# ---------------------------------------------------------------------------
# convenience
# ---------------------------------------------------------------------------

def build(kind: FormulationKind | str, instance: Instance, tree: ScenarioTree, cuts: bool = False) -> Model:
    kind = FormulationKind(kind)
    if kind is FormulationKind.MULTISTAGE_RISK_AVERSE:
        return build_multistage(instance, tree)
    if kind is FormulationKind.TWO_STAGE_RISK_AVERSE_TRANSFORMED:
        return build_two_stage(instance, tree, transformed=True)
    if kind is FormulationKind.TWO_STAGE_RISK_AVERSE:
        return build_two_stage(instance, tree, transformed=False)
    if kind is FormulationKind.MULTISTAGE_PRIORITIZED:
        return build_prioritized(instance, tree, multistage=True, cuts=cuts)
    if kind is FormulationKind.TWO_STAGE_PRIORITIZED_TRANSFORMED:
        return build_prioritized(instance, tree, multistage=False, transformed=True, cuts=cuts)
    if kind is FormulationKind.TWO_STAGE_PRIORITIZED:
        return build_prioritized(instance, tree, multistage=False, transformed=False, cuts=cuts)
    raise ModelError(f"{kind.value} is not built from a scenario tree")


def solve_model(model: Model, solver: str = "bundled", **options) -> SolutionTree:
    res = model.solve(solver, **options)
    if res.x is None:
        raise ModelError(f"{model.kind.value}: solver returned {res.status.value}")
    return extract_solution(model, res)
