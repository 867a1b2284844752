"""Discrete VaR/CVaR and the per-node coefficients of the nested mean-CVaR objective."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .instance import Instance, RiskParams
from .scenario_tree import ScenarioTree, TreeMode


class RiskError(ValueError):
    pass


@dataclass(frozen=True)
class DiscreteDistribution:
    probs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "values", v)
        if p.size == 0:
            raise RiskError("empty distribution")
        if p.shape != v.shape:
            raise RiskError("probabilities and values differ in length")
        if np.any(p <= 0):
            raise RiskError("probabilities must be positive")
        if abs(p.sum() - 1.0) > 1e-12 * max(1, p.size):
            raise RiskError(f"probabilities sum to {p.sum()}, not 1")

    @classmethod
    def from_atoms(cls, atoms: Iterable[tuple[float, float]]) -> "DiscreteDistribution":
        atoms = list(atoms)
        if not atoms:
            raise RiskError("empty distribution")
        p, v = zip(*atoms)
        return cls(np.array(p), np.array(v))

    @classmethod
    def uniform(cls, values: Sequence[float]) -> "DiscreteDistribution":
        v = np.asarray(values, dtype=float)
        if v.size == 0:
            raise RiskError("empty distribution")
        return cls(np.full(v.size, 1.0 / v.size), v)

    @property
    def mean(self) -> float:
        return float(self.probs @ self.values)

    def shifted(self, a: float) -> "DiscreteDistribution":
        return DiscreteDistribution(self.probs, self.values + a)

    def scaled(self, g: float) -> "DiscreteDistribution":
        return DiscreteDistribution(self.probs, self.values * g)


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise RiskError(f"alpha={alpha} outside (0, 1)")


def var(alpha: float, dist: DiscreteDistribution) -> float:
    """Left-continuous alpha-quantile: smallest value with P(Z <= v) >= alpha."""
    _check_alpha(alpha)
    order = np.argsort(dist.values, kind="stable")
    cum = np.cumsum(dist.probs[order])
    # tolerance absorbs round-off in cumulative sums such as 0.1 + 0.2
    k = int(np.searchsorted(cum, alpha - 1e-12, side="left"))
    k = min(k, len(order) - 1)
    return float(dist.values[order[k]])


def cvar(alpha: float, dist: DiscreteDistribution) -> float:
    """Minimum of eta + E[(Z - eta)+] / (1 - alpha), attained at eta = VaR."""
    v = var(alpha, dist)
    excess = np.maximum(dist.values - v, 0.0)
    return v + float(dist.probs @ excess) / (1.0 - alpha)


def mean_cvar(lam: float, alpha: float, dist: DiscreteDistribution) -> float:
    if not 0.0 <= lam <= 1.0:
        raise RiskError(f"lambda={lam} outside [0, 1]")
    return (1.0 - lam) * dist.mean + lam * cvar(alpha, dist)


def cvar_lp(alpha: float, dist: DiscreteDistribution) -> float:
    """CVaR as the optimal value of its minimization LP, solved by the bundled simplex."""
    from .lp_core import MixedIntegerProgram, solve_lp

    _check_alpha(alpha)
    mip = MixedIntegerProgram("cvar")
    eta = mip.add_var("eta", -np.inf, np.inf, obj=1.0)
    for k, (p, z) in enumerate(zip(dist.probs, dist.values)):
        u = mip.add_var(f"u{k}", 0.0, np.inf, obj=p / (1.0 - alpha))
        mip.add_constraint({u: 1.0, eta: 1.0}, ">=", float(z))
    res = solve_lp(mip)
    if not res.ok:
        raise RiskError(f"CVaR LP ended with status {res.status.value}")
    return res.objective


@dataclass(frozen=True)
class EcrmCoefficients:
    """Per-node objective weights of the extensive-form nested risk objective.

    ``f``/``c`` hold the scaled cost arrays, ``lam`` multiplies the node's
    VaR variable, ``alpha`` the node's excess variable and ``one`` the
    priority-pair count (budget-mode trees only).
    """

    f: dict[int, np.ndarray]
    c: dict[int, np.ndarray]
    lam: dict[int, float]
    alpha: dict[int, float]
    one: dict[int, float] | None = None


def ecrm_coefficients(tree: ScenarioTree, instance: Instance, risk: RiskParams | None = None) -> EcrmCoefficients:
    risk = risk or instance.risk
    T = len(risk.lam)
    for a in risk.alpha:
        if a >= 1.0:
            raise ZeroDivisionError("alpha = 1 makes the excess weight undefined")
    budget = tree.mode is TreeMode.DEMAND_AND_BUDGET
    f, c, lam, alpha, one = {}, {}, {}, {}, {}
    for n in tree.ids:
        t = tree.stage(n)
        leaf = tree.is_leaf(n)
        if n == tree.root:
            alpha[n] = 0.0
            if budget:
                c[n] = np.zeros((instance.M, instance.N))
                f[n] = np.zeros(instance.M)
                one[n] = 1.0
            else:
                f[n] = instance.f[t - 1].copy()
                c[n] = instance.c[t - 1].copy()
        else:
            lt = risk.lam[t - 1]
            f[n] = (1.0 - lt) * instance.f[t - 1]
            c[n] = (1.0 - lt) * instance.c[t - 1]
            alpha[n] = lt / (1.0 - risk.alpha[t - 1])
            if budget:
                one[n] = 0.0 if leaf else 1.0 - lt
        if leaf:
            lam[n] = 0.0
        else:
            if t + 1 > T:
                raise RiskError(f"risk parameters do not cover stage {t + 1}")
            lam[n] = risk.lam[t]
    return EcrmCoefficients(f, c, lam, alpha, one if budget else None)
