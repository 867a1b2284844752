"""Two hand-checkable instances with known closed-form optima.

``example_one``: two sites, one customer, two stages; stage-2 demand is 50
or 150.  The two-stage plan must rent both sites for stage 2, the
multistage plan only needs the second site on the high-demand branch.

``example_two``: three equal sites, one customer, a stage-0 decision root
and two stages of demand/budget uncertainty.  The multistage priority
lists beat the single two-stage list by exactly 2.
"""

from __future__ import annotations

import numpy as np

from .instance import Instance, RiskParams
from .scenario_tree import ScenarioTree, TreeMode, from_levels

EX1_F = 10.0
EX1_C = (1.0, 2.0)
EX1_H = (50.0, 100.0)
EX1_ALPHA = 0.5
EX1_LAMBDAS = (0.0, 0.25, 0.5, 1.0)
EX2_LAMBDAS = (0.0, 0.5, 1.0)
EX2_VMS = 2.0


def example_one(lam: float, f: float = EX1_F, c11: float = EX1_C[0], c21: float = EX1_C[1]) -> tuple[Instance, ScenarioTree]:
    fc = np.full((2, 2), f)
    c = np.zeros((2, 2, 1))
    c[:, 0, 0], c[:, 1, 0] = c11, c21
    h = np.array([EX1_H, EX1_H])
    inst = Instance(fc, c, h, RiskParams((lam, lam), (EX1_ALPHA, EX1_ALPHA)))
    tree = from_levels([[(0, [0.0], None)], [(0, [50.0], None), (0, [150.0], None)]], TreeMode.DEMAND_ONLY)
    return inst, tree


def example_one_values(lam: float, f: float = EX1_F, c11: float = EX1_C[0], c21: float = EX1_C[1]) -> dict:
    """Closed-form optima and value of the multistage model."""
    tail = lam * (2 * f + 50 * c11 + 100 * c21)
    z_ts = (1 - lam) * (4 * f + 100 * c11 + 100 * c21) / 2 + tail
    z_ms = (1 - lam) * (3 * f + 100 * c11 + 100 * c21) / 2 + tail
    return {"z_ts": z_ts, "z_ms": z_ms, "vms": 0.5 * (1 - lam) * f}


def example_two(lam: float, alpha: float = 0.95) -> tuple[Instance, ScenarioTree]:
    f = np.zeros((2, 3))
    c = np.zeros((2, 3, 1))
    c[:, :, 0] = (1.0, 2.0, 3.0)
    h = np.full((2, 3), 100.0)
    inst = Instance(f, c, h, RiskParams((lam, lam), (alpha, alpha)))
    tree = from_levels([
        [(0, None, None)],
        [(0, [50.0], 1), (0, [100.0], 1)],
        [(0, [200.0], 1), (0, [300.0], 2), (1, [200.0], 2), (1, [300.0], 2)],
    ], TreeMode.DEMAND_AND_BUDGET)
    return inst, tree
