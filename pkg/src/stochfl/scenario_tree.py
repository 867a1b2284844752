"""Scenario trees: node structure, generators and budget sampling.

Nodes are numbered breadth-first with the root as node 1. In
``DEMAND_ONLY`` mode the root is stage 1 and carries a deterministic demand
vector. In ``DEMAND_AND_BUDGET`` mode (prioritized models) a stage-0 root with
no realization is prepended and every other node carries a demand vector and
an opening budget.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .instance import Instance, MAX_REJECTIONS, PRNG_ALGORITHM, sample_truncated_normal

PROB_TOL = 1e-12


class TreeError(ValueError):
    pass


class TreeMode(str, enum.Enum):
    DEMAND_ONLY = "demand"
    DEMAND_AND_BUDGET = "budget"


class TreeKind(str, enum.Enum):
    SD = "sd"
    SI = "si"
    SD0 = "sd0"


@dataclass
class Node:
    id: int
    parent: int | None
    stage: int
    p: float
    d: np.ndarray | None
    F: int | None = None
    children: list[int] = field(default_factory=list)


class ScenarioTree:
    def __init__(self, nodes: list[Node], mode: TreeMode = TreeMode.DEMAND_ONLY, meta: dict | None = None):
        self.mode = TreeMode(mode)
        self.meta = dict(meta or {})
        self._nodes = {n.id: n for n in nodes}
        if sorted(self._nodes) != list(range(1, len(nodes) + 1)):
            raise TreeError("node ids must be 1..K")
        for n in self._nodes.values():
            n.children = []
        for nid in sorted(self._nodes):
            n = self._nodes[nid]
            if n.parent is not None:
                if n.parent not in self._nodes:
                    raise TreeError(f"node {nid}: unknown parent {n.parent}")
                self._nodes[n.parent].children.append(nid)
        self._paths: dict[int, list[int]] = {}
        self._stage_nodes: dict[int, list[int]] = {}
        for nid in sorted(self._nodes):
            self._stage_nodes.setdefault(self._nodes[nid].stage, []).append(nid)
        self.validate()

    # -- structure ---------------------------------------------------------
    @property
    def root(self) -> int:
        return 1

    @property
    def ids(self) -> list[int]:
        return sorted(self._nodes)

    def __len__(self) -> int:
        return len(self._nodes)

    def node(self, n: int) -> Node:
        try:
            return self._nodes[n]
        except KeyError:
            raise TreeError(f"unknown node id {n}") from None

    def parent(self, n: int) -> int | None:
        return self.node(n).parent

    def children(self, n: int) -> list[int]:
        return list(self.node(n).children)

    def is_leaf(self, n: int) -> bool:
        return not self.node(n).children

    def leaves(self) -> list[int]:
        return [n for n in self.ids if self.is_leaf(n)]

    def non_leaves(self) -> list[int]:
        return [n for n in self.ids if not self.is_leaf(n)]

    def path(self, n: int) -> list[int]:
        """Root-first list of nodes from the root to ``n`` inclusive."""
        if n not in self._paths:
            node = self.node(n)
            self._paths[n] = ([] if node.parent is None else self.path(node.parent)) + [n]
        return list(self._paths[n])

    def subtree(self, n: int) -> list[int]:
        out, stack = [], [n]
        self.node(n)
        while stack:
            k = stack.pop()
            out.append(k)
            stack.extend(reversed(self._nodes[k].children))
        return sorted(out)

    def stage(self, n: int) -> int:
        return self.node(n).stage

    @property
    def stages(self) -> list[int]:
        return sorted(self._stage_nodes)

    @property
    def first_stage(self) -> int:
        return self.stages[0]

    @property
    def last_stage(self) -> int:
        return self.stages[-1]

    def stage_nodes(self, t: int) -> list[int]:
        return list(self._stage_nodes.get(t, []))

    def p(self, n: int) -> float:
        return self.node(n).p

    def demand(self, n: int) -> np.ndarray:
        d = self.node(n).d
        if d is None:
            raise TreeError(f"node {n} carries no demand")
        return d

    def budget(self, n: int) -> int:
        F = self.node(n).F
        if F is None:
            raise TreeError(f"node {n} carries no budget")
        return F

    @property
    def num_customers(self) -> int:
        for n in self.ids:
            if self._nodes[n].d is not None:
                return len(self._nodes[n].d)
        return 0

    @property
    def num_scenarios(self) -> int:
        return len(self.leaves())

    # -- validation --------------------------------------------------------
    def validate(self) -> None:
        root = self._nodes.get(1)
        if root is None or root.parent is not None:
            raise TreeError("node 1 must be the root")
        budget = self.mode is TreeMode.DEMAND_AND_BUDGET
        if budget and root.stage != 0:
            raise TreeError("budget-mode trees need a stage-0 root")
        if not budget and root.stage != 1:
            raise TreeError("demand-only trees need a stage-1 root")
        N = None
        for n in self._nodes.values():
            if n.parent is None and n.id != 1:
                raise TreeError(f"node {n.id}: only the root may lack a parent")
            if n.parent is not None and n.stage != self._nodes[n.parent].stage + 1:
                raise TreeError(f"node {n.id}: stage must be parent stage + 1")
            if not 0.0 < n.p <= 1.0 + PROB_TOL:
                raise TreeError(f"node {n.id}: probability {n.p} outside (0, 1]")
            if budget and n.id == 1:
                if n.d is not None or n.F is not None:
                    raise TreeError("budget-mode root carries no realization")
                continue
            if n.d is None:
                raise TreeError(f"node {n.id}: missing demand")
            if np.any(n.d < 0):
                raise TreeError(f"node {n.id}: negative demand")
            if N is None:
                N = len(n.d)
            elif len(n.d) != N:
                raise TreeError(f"node {n.id}: demand length {len(n.d)} differs from {N}")
            if budget:
                if n.F is None or n.F < 0 or int(n.F) != n.F:
                    raise TreeError(f"node {n.id}: budget must be a nonnegative integer")
        if abs(root.p - 1.0) > PROB_TOL:
            raise TreeError("root probability must be 1")
        for n in self._nodes.values():
            if n.children:
                tot = sum(self._nodes[k].p for k in n.children)
                if abs(tot - n.p) > 1e-9:
                    raise TreeError(f"node {n.id}: child probabilities sum to {tot}, expected {n.p}")
        for t, ids in self._stage_nodes.items():
            tot = sum(self._nodes[k].p for k in ids)
            if abs(tot - 1.0) > 1e-9:
                raise TreeError(f"stage {t}: probabilities sum to {tot}")
        depth = {len(self.path(k)) for k in self.leaves()}
        if len(depth) != 1:
            raise TreeError("all leaves must sit in the last stage")

    # -- IO ----------------------------------------------------------------
    def to_dict(self) -> dict:
        nodes = []
        for nid in self.ids:
            n = self._nodes[nid]
            row = {"id": n.id, "parent": n.parent, "stage": n.stage, "p": n.p,
                   "d": None if n.d is None else n.d.tolist()}
            if n.F is not None:
                row["F"] = int(n.F)
            nodes.append(row)
        out = {"mode": self.mode.value, "nodes": nodes}
        if self.meta:
            out["meta"] = self.meta
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioTree":
        try:
            mode = TreeMode(data.get("mode", TreeMode.DEMAND_ONLY.value))
            nodes = []
            for row in data["nodes"]:
                d = row.get("d")
                nodes.append(Node(int(row["id"]), None if row.get("parent") is None else int(row["parent"]),
                                  int(row["stage"]), float(row["p"]),
                                  None if d is None else np.asarray(d, dtype=float),
                                  None if row.get("F") is None else int(row["F"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise TreeError(f"malformed tree document: {exc}") from exc
        return cls(nodes, mode, data.get("meta"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "ScenarioTree":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise TreeError(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_dict(data)

    def scenarios(self) -> list[list[int]]:
        return [self.path(leaf) for leaf in self.leaves()]


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def from_levels(levels: list[list[tuple[int, np.ndarray | None, int | None]]], mode: TreeMode) -> ScenarioTree:
    """Build a tree from per-stage lists of (parent index in previous level, d, F).

    Children of a node get equal shares of its probability.
    """
    nodes: list[Node] = []
    prev: list[Node] = []
    first = 0 if mode is TreeMode.DEMAND_AND_BUDGET else 1
    for depth, level in enumerate(levels):
        cur = []
        counts: dict[int, int] = {}
        for parent_idx, _, _ in level:
            counts[parent_idx] = counts.get(parent_idx, 0) + 1
        for parent_idx, d, F in level:
            nid = len(nodes) + 1
            if depth == 0:
                parent, p = None, 1.0
            else:
                par = prev[parent_idx]
                parent, p = par.id, par.p / counts[parent_idx]
            node = Node(nid, parent, first + depth, p, None if d is None else np.asarray(d, dtype=float), F)
            nodes.append(node)
            cur.append(node)
        prev = cur
    return ScenarioTree(nodes, mode)


def chain_tree(demands, budgets=None) -> ScenarioTree:
    """Single-scenario tree; with budgets a stage-0 root is prepended."""
    demands = [np.asarray(d, dtype=float) for d in demands]
    if budgets is None:
        return from_levels([[(0, d, None)] for d in demands], TreeMode.DEMAND_ONLY)
    levels = [[(0, None, None)]] + [[(0, d, int(F))] for d, F in zip(demands, budgets)]
    return from_levels(levels, TreeMode.DEMAND_AND_BUDGET)


def _stage_params(instance: Instance, t: int) -> tuple[np.ndarray, np.ndarray]:
    if instance.demand_mean is None or instance.demand_std is None:
        raise TreeError("instance carries no demand distribution")
    return instance.demand_mean[t - 1], instance.demand_std[t - 1]


def _draw(rng, instance: Instance, t: int) -> np.ndarray:
    """One stage-t demand draw that fits total capacity (resampled otherwise)."""
    mean, std = _stage_params(instance, t)
    cap = float(instance.h[t - 1].sum())
    for _ in range(MAX_REJECTIONS):
        d = sample_truncated_normal(rng, mean, std)
        if d.sum() <= cap:
            return d
    raise TreeError(f"stage {t}: could not draw demand within total capacity {cap}")


def build_tree(kind: TreeKind | str, instance: Instance, C: int, seed,
               mode: TreeMode | str = TreeMode.DEMAND_ONLY, d1=None) -> ScenarioTree:
    """Sample an SD, SI or SD0 tree with ``C`` equiprobable children per node."""
    kind = TreeKind(kind)
    mode = TreeMode(mode)
    if C < 1:
        raise TreeError("branching factor must be at least 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    T = instance.T
    budget = mode is TreeMode.DEMAND_AND_BUDGET
    levels: list[list[tuple[int, np.ndarray | None, int | None]]] = []
    if budget:
        levels.append([(0, None, None)])
        branch_stages = range(1, T + 1)
    else:
        root_d = np.asarray(d1, dtype=float) if d1 is not None else _draw(rng, instance, 1)
        levels.append([(0, root_d, None)])
        branch_stages = range(2, T + 1)
    for t in branch_stages:
        parents = len(levels[-1])
        level = []
        shared = [_draw(rng, instance, t) for _ in range(C)] if kind is TreeKind.SI else None
        for pi in range(parents):
            for k in range(C):
                if kind is TreeKind.SI:
                    d = shared[k].copy()
                elif kind is TreeKind.SD0 and k == C - 1:
                    d = np.zeros(instance.N)
                else:
                    d = _draw(rng, instance, t)
                level.append((pi, d, 0 if budget else None))  # budgets drawn below
        levels.append(level)
    tree = from_levels(levels, mode)
    tree.meta.update({"kind": kind.value, "C": C, "seed": int(seed) if np.isscalar(seed) else str(seed),
                      "prng": PRNG_ALGORITHM})
    if budget:
        sample_budgets(tree, float(instance.h[0, 0]), rng, shared_children=(kind is TreeKind.SI))
        tree.validate()
    return tree


def budget_floor(tree: ScenarioTree, h: float) -> dict[int, int]:
    """Minimum new openings per stage: L_t = ceil(max D_t / h) - ceil(max D_{t-1} / h), floored at 0."""
    out = {}
    prev = 0
    for t in tree.stages:
        if t == 0:
            continue
        top = max(float(tree.demand(n).sum()) for n in tree.stage_nodes(t))
        need = math.ceil(top / h - 1e-9) if h > 0 else 0
        out[t] = max(need - prev, 0)
        prev = need
    return out


def sample_budgets(tree: ScenarioTree, h: float, rng, shared_children: bool = False) -> dict[int, int]:
    """Draw integer budgets F_n uniformly from {L_t, L_t + 1} and attach them."""
    if tree.mode is not TreeMode.DEMAND_AND_BUDGET:
        raise TreeError("budgets need a budget-mode tree")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.Generator(np.random.PCG64(rng))
    L = budget_floor(tree, h)
    out = {}
    for t in tree.stages:
        if t == 0:
            continue
        ids = tree.stage_nodes(t)
        if shared_children:
            width = len(tree.children(tree.parent(ids[0])))
            draws = [int(rng.integers(L[t], L[t] + 2)) for _ in range(width)]
            for k, n in enumerate(ids):
                out[n] = draws[k % width]
        else:
            for n in ids:
                out[n] = int(rng.integers(L[t], L[t] + 2))
    for n, F in out.items():
        tree.node(n).F = F
    check_budget_feasibility(tree, h)
    return out


def check_budget_feasibility(tree: ScenarioTree, h: float) -> None:
    for n in tree.ids:
        if n == tree.root:
            continue
        cum = sum(tree.budget(m) for m in tree.path(n)[1:])
        if tree.demand(n).sum() > h * cum + 1e-6:
            raise TreeError(f"node {n}: demand exceeds cumulative budget capacity")


def enforce_feasibility(tree: ScenarioTree, instance: Instance, rng=None, retries: int = MAX_REJECTIONS) -> ScenarioTree:
    """Resample any node whose total demand exceeds total stage capacity."""
    if tree.mode is not TreeMode.DEMAND_ONLY:
        raise TreeError("feasibility refinement applies to demand-only trees")
    for n in tree.ids:
        node = tree.node(n)
        t = node.stage
        cap = float(instance.h[t - 1].sum())
        tries = 0
        while node.d.sum() > cap + 1e-9:
            if rng is None:
                raise TreeError(f"stage {t}: node {n} demand {node.d.sum():.6g} exceeds capacity {cap:.6g}")
            tries += 1
            if tries > retries:
                raise TreeError(f"stage {t}: retry cap exceeded while resampling node {n}")
            mean, std = _stage_params(instance, t)
            node.d = sample_truncated_normal(rng, mean, std)
    return tree
