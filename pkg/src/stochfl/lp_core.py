"""Solver-agnostic MILP container and the bundled reference solver.

The bundled engine is a dense-tableau, bounded-variable simplex (primal and
dual) driven by a best-bound branch-and-bound. It is small enough to audit and
fast enough for the desk-scale instances used in tests. An adapter for the
HiGHS engine shipped with scipy sits behind the same contract so that larger
sweeps and independent cross-checks can swap it in.
"""

from __future__ import annotations

import enum
import heapq
import math
import time
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping

import numpy as np

INF = math.inf
INT_TOL = 1e-6
FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-11


class Sense(str, enum.Enum):
    LE = "<="
    EQ = "="
    GE = ">="


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    GAP_LIMIT = "GapLimit"
    ITER_LIMIT = "IterLimit"


class SolverError(RuntimeError):
    pass


@dataclass
class Variable:
    name: str
    lb: float = 0.0
    ub: float = INF
    integer: bool = False


@dataclass
class Constraint:
    cols: np.ndarray
    vals: np.ndarray
    sense: Sense
    rhs: float
    name: str = ""


class MixedIntegerProgram:
    """Minimization MILP with named variables and a handle registry.

    Handles are arbitrary hashable keys such as ``(node, "x", i)``; they map
    one-to-one onto columns.
    """

    def __init__(self, name: str = "mip"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.obj: list[float] = []
        self.obj_offset = 0.0
        self.handles: dict[Hashable, int] = {}

    # -- construction ------------------------------------------------------
    @property
    def num_vars(self) -> int:
        return len(self.variables)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def add_var(self, name: str, lb: float = 0.0, ub: float = INF,
                integer: bool = False, obj: float = 0.0,
                key: Hashable | None = None) -> int:
        if lb > ub:
            raise ValueError(f"variable {name}: lower bound {lb} exceeds upper bound {ub}")
        col = len(self.variables)
        self.variables.append(Variable(name, float(lb), float(ub), bool(integer)))
        self.obj.append(float(obj))
        if key is not None:
            if key in self.handles:
                raise ValueError(f"duplicate handle {key!r}")
            self.handles[key] = col
        return col

    def add_constraint(self, terms: Mapping[int, float] | Iterable[tuple[int, float]],
                       sense: Sense | str, rhs: float, name: str = "") -> int:
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[int, float] = {}
        for col, val in items:
            if not 0 <= col < len(self.variables):
                raise ValueError(f"constraint {name!r} references unknown column {col}")
            acc[col] = acc.get(col, 0.0) + float(val)
        cols = np.fromiter(acc.keys(), dtype=np.int64, count=len(acc))
        vals = np.fromiter(acc.values(), dtype=float, count=len(acc))
        self.constraints.append(Constraint(cols, vals, Sense(sense), float(rhs), name))
        return len(self.constraints) - 1

    def add_objective(self, col: int, coef: float) -> None:
        self.obj[col] += float(coef)

    def col(self, key: Hashable) -> int:
        return self.handles[key]

    def copy(self) -> "MixedIntegerProgram":
        other = MixedIntegerProgram(self.name)
        other.variables = [Variable(v.name, v.lb, v.ub, v.integer) for v in self.variables]
        other.constraints = list(self.constraints)
        other.obj = list(self.obj)
        other.obj_offset = self.obj_offset
        other.handles = dict(self.handles)
        return other

    def relaxed(self) -> "MixedIntegerProgram":
        other = self.copy()
        for v in other.variables:
            v.integer = False
        return other

    # -- dense export ------------------------------------------------------
    def arrays(self):
        """Return (c, A, senses, b, lb, ub, integer) as numpy arrays."""
        n, m = self.num_vars, self.num_constraints
        A = np.zeros((m, n))
        b = np.empty(m)
        senses = np.empty(m, dtype="<U2")
        for r, con in enumerate(self.constraints):
            A[r, con.cols] = con.vals
            b[r] = con.rhs
            senses[r] = con.sense.value
        c = np.asarray(self.obj, dtype=float)
        lb = np.array([v.lb for v in self.variables], dtype=float)
        ub = np.array([v.ub for v in self.variables], dtype=float)
        integer = np.array([v.integer for v in self.variables], dtype=bool)
        return c, A, senses, b, lb, ub, integer

    def evaluate(self, x: np.ndarray) -> float:
        return float(np.dot(self.obj, x)) + self.obj_offset

    def max_violation(self, x: np.ndarray) -> float:
        """Largest constraint or bound violation, scaled by row magnitude."""
        worst = 0.0
        for con in self.constraints:
            lhs = float(np.dot(con.vals, x[con.cols]))
            scale = max(1.0, abs(con.rhs), float(np.max(np.abs(con.vals), initial=0.0)))
            if con.sense is Sense.LE:
                v = lhs - con.rhs
            elif con.sense is Sense.GE:
                v = con.rhs - lhs
            else:
                v = abs(lhs - con.rhs)
            worst = max(worst, v / scale)
        for j, var in enumerate(self.variables):
            worst = max(worst, var.lb - x[j], x[j] - var.ub)
        return worst

    def to_lp_format(self) -> str:
        """Export in CPLEX LP text format for cross-checking elsewhere."""
        def term(coef, name, first):
            sign = "-" if coef < 0 else ("" if first else "+")
            return f"{sign} {abs(coef):.12g} {name}".strip()

        names = [f"v{j}" for j in range(self.num_vars)]
        lines = ["\\ " + self.name, "Minimize", " obj:"]
        objt = [term(c, names[j], k == 0) for k, (j, c) in
                enumerate((j, c) for j, c in enumerate(self.obj) if c != 0)]
        lines.append("  " + (" ".join(objt) if objt else "0 " + names[0]))
        lines.append("Subject To")
        for r, con in enumerate(self.constraints):
            body = " ".join(term(v, names[c], k == 0) for k, (c, v) in enumerate(zip(con.cols, con.vals)))
            op = {"<=": "<=", "=": "=", ">=": ">="}[con.sense.value]
            lines.append(f" c{r}: {body or '0 ' + names[0]} {op} {con.rhs:.12g}")
        lines.append("Bounds")
        for j, v in enumerate(self.variables):
            lo = "-inf" if v.lb == -INF else f"{v.lb:.12g}"
            hi = "+inf" if v.ub == INF else f"{v.ub:.12g}"
            lines.append(f" {lo} <= {names[j]} <= {hi}")
        ints = [names[j] for j, v in enumerate(self.variables) if v.integer]
        if ints:
            lines.append("General")
            lines.append(" " + " ".join(ints))
        lines.append("End")
        return "\n".join(lines) + "\n"


def fix_columns(mip: MixedIntegerProgram, values: Mapping[Hashable, float]) -> MixedIntegerProgram:
    """Copy of ``mip`` with the given handles pinned to fixed values."""
    out = mip.copy()
    for key, val in values.items():
        col = mip.handles[key]
        var = out.variables[col]
        if val < var.lb - FEAS_TOL or val > var.ub + FEAS_TOL:
            raise ValueError(f"fixing {key!r}={val} outside bounds [{var.lb}, {var.ub}]")
        out.variables[col] = Variable(var.name, float(val), float(val), var.integer)
    return out


@dataclass
class SolveResult:
    status: Status
    objective: float = math.nan
    x: np.ndarray | None = None
    bound: float = math.nan
    nodes: int = 0
    iterations: int = 0
    wall_time: float = 0.0
    dual_bound: float = math.nan
    handles: dict = field(default_factory=dict, repr=False)

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL

    def value(self, key: Hashable) -> float:
        return float(self.x[self.handles[key]])


# ---------------------------------------------------------------------------
# bounded-variable simplex on a dense tableau
# ---------------------------------------------------------------------------

AT_LB, AT_UB, FREE0, BASIC = 0, 1, 2, 3


class _Infeasible(Exception):
    pass


class _Unbounded(Exception):
    pass


class _Stalled(Exception):
    pass


class Tableau:
    """Equality-form LP ``min c.x  s.t.  A x = b, lb <= x <= ub``.

    The last ``m`` structural columns are slacks, so the all-slack basis is
    always available. Pricing is Dantzig's rule with a switch to Bland's rule
    after a run of degenerate pivots, which rules out cycling.
    """

    BLAND_AFTER = 30
    REFACTOR_EVERY = 200

    def __init__(self, A: np.ndarray, b: np.ndarray, c: np.ndarray,
                 lb: np.ndarray, ub: np.ndarray, max_iter: int = 50_000):
        self.A = A
        self.b = b
        self.c = c
        self.lb = lb.copy()
        self.ub = ub.copy()
        self.m, self.n = A.shape
        self.max_iter = max_iter
        self.iterations = 0
        self.basis: np.ndarray | None = None
        self.status: np.ndarray | None = None

    # -- factorization -----------------------------------------------------
    def _nonbasic_value(self, j: int) -> float:
        s = self.status[j]
        if s == AT_LB:
            return self.lb[j]
        if s == AT_UB:
            return self.ub[j]
        return 0.0

    def _refactor(self, cost: np.ndarray) -> None:
        B = self.A[:, self.basis]
        try:
            self.T = np.linalg.solve(B, self.A)
        except np.linalg.LinAlgError as exc:
            raise SolverError("singular basis during refactorization") from exc
        self.x = np.zeros(self.n)
        nb = self.status != BASIC
        for j in np.flatnonzero(nb):
            self.x[j] = self._nonbasic_value(j)
        rhs = self.b - self.A[:, nb] @ self.x[nb]
        self.x[self.basis] = np.linalg.solve(B, rhs)
        self.cost = cost
        self.d = cost - cost[self.basis] @ self.T
        self.d[self.basis] = 0.0
        self.since_refactor = 0

    def _default_status(self) -> np.ndarray:
        st = np.empty(self.n, dtype=np.int8)
        for j in range(self.n):
            if self.lb[j] > -INF:
                st[j] = AT_LB
            elif self.ub[j] < INF:
                st[j] = AT_UB
            else:
                st[j] = FREE0
        return st

    def _fix_status(self) -> None:
        """Make nonbasic statuses consistent with (possibly changed) bounds."""
        for j in np.flatnonzero(self.status != BASIC):
            s = self.status[j]
            if s == AT_LB and self.lb[j] == -INF:
                self.status[j] = AT_UB if self.ub[j] < INF else FREE0
            elif s == AT_UB and self.ub[j] == INF:
                self.status[j] = AT_LB if self.lb[j] > -INF else FREE0
            elif s == FREE0 and (self.lb[j] > -INF or self.ub[j] < INF):
                self.status[j] = AT_LB if self.lb[j] > -INF else AT_UB

    # -- pivoting ----------------------------------------------------------
    def _pivot(self, r: int, q: int) -> None:
        T = self.T
        prow = T[r] / T[r, q]
        col = T[:, q].copy()
        col[r] = 0.0
        T -= np.outer(col, prow)
        T[r] = prow
        self.d -= self.d[q] * prow
        self.d[q] = 0.0
        leaving = self.basis[r]
        self.basis[r] = q
        self.status[q] = BASIC
        self.iterations += 1
        self.since_refactor += 1
        if self.since_refactor >= self.REFACTOR_EVERY:
            self._refactor(self.cost)
        return leaving

    def _entering(self, bland: bool) -> tuple[int, int]:
        """Pick an improving nonbasic column; returns (col, direction)."""
        d, st = self.d, self.status
        fixed = self.lb == self.ub
        up = ((st == AT_LB) | (st == FREE0)) & (d < -OPT_TOL) & ~fixed
        down = ((st == AT_UB) | (st == FREE0)) & (d > OPT_TOL) & ~fixed
        cand = up | down
        if not cand.any():
            return -1, 0
        if bland:
            q = int(np.flatnonzero(cand)[0])
        else:
            score = np.where(cand, np.abs(d), -1.0)
            q = int(np.argmax(score))
        return q, (1 if up[q] else -1)

    def _primal(self, cost: np.ndarray) -> None:
        """Primal simplex from a primal-feasible basis."""
        degenerate = 0
        while True:
            if self.iterations >= self.max_iter:
                raise _Stalled()
            q, direction = self._entering(degenerate >= self.BLAND_AFTER)
            if q < 0:
                return
            alpha = self.T[:, q] * direction
            xb = self.x[self.basis]
            lbb = self.lb[self.basis]
            ubb = self.ub[self.basis]
            theta = self.ub[q] - self.lb[q]
            r = -1
            with np.errstate(divide="ignore", invalid="ignore"):
                pos = alpha > PIVOT_TOL
                neg = alpha < -PIVOT_TOL
                ratios = np.full(self.m, INF)
                ratios[pos] = (xb[pos] - lbb[pos]) / alpha[pos]
                ratios[neg] = (ubb[neg] - xb[neg]) / (-alpha[neg])
            ratios = np.maximum(ratios, 0.0)
            if self.m:
                best = float(np.min(ratios))
                if best < theta:
                    theta = best
                    ties = np.flatnonzero(ratios <= best + 1e-12)
                    if degenerate >= self.BLAND_AFTER:
                        r = int(ties[np.argmin(self.basis[ties])])
                    else:
                        r = int(ties[np.argmax(np.abs(alpha[ties]))])
            if theta == INF:
                raise _Unbounded()
            degenerate = degenerate + 1 if theta <= 1e-12 else 0
            step = direction * theta
            self.x[self.basis] -= step * self.T[:, q]
            self.x[q] += step
            if r < 0:
                # bound flip, basis unchanged
                self.status[q] = AT_UB if direction > 0 else AT_LB
                self.x[q] = self.ub[q] if direction > 0 else self.lb[q]
                self.iterations += 1
                continue
            p = self.basis[r]
            to_lb = (direction * self.T[r, q]) > 0
            self._pivot(r, q)
            self.status[p] = AT_LB if to_lb else AT_UB
            self.x[p] = self.lb[p] if to_lb else self.ub[p]

    def _dual(self) -> None:
        """Dual simplex from a dual-feasible basis."""
        degenerate = 0
        while True:
            if self.iterations >= self.max_iter:
                raise _Stalled()
            xb = self.x[self.basis]
            lbb = self.lb[self.basis]
            ubb = self.ub[self.basis]
            below = lbb - xb
            above = xb - ubb
            viol = np.maximum(below, above)
            scale = 1.0 + np.maximum(np.abs(lbb), np.where(np.isfinite(ubb), np.abs(ubb), 0.0))
            scaled = np.where(np.isfinite(viol), viol / np.where(np.isfinite(scale), scale, 1.0), 0.0)
            r = int(np.argmax(scaled)) if self.m else 0
            if not self.m or scaled[r] <= FEAS_TOL:
                return
            p = self.basis[r]
            low = below[r] > above[r]
            row = self.T[r]
            st = self.status
            fixed = self.lb == self.ub
            if low:
                elig = (((st == AT_LB) & (row < -PIVOT_TOL)) | ((st == AT_UB) & (row > PIVOT_TOL))
                        | ((st == FREE0) & (np.abs(row) > PIVOT_TOL)))
            else:
                elig = (((st == AT_LB) & (row > PIVOT_TOL)) | ((st == AT_UB) & (row < -PIVOT_TOL))
                        | ((st == FREE0) & (np.abs(row) > PIVOT_TOL)))
            elig &= ~fixed
            if not elig.any():
                raise _Infeasible()
            idx = np.flatnonzero(elig)
            ratios = np.abs(self.d[idx]) / np.abs(row[idx])
            best = float(np.min(ratios))
            ties = idx[ratios <= best + 1e-12]
            if degenerate >= self.BLAND_AFTER:
                q = int(ties[0])
            else:
                q = int(ties[np.argmax(np.abs(row[ties]))])
            degenerate = degenerate + 1 if best <= 1e-12 else 0
            target = self.lb[p] if low else self.ub[p]
            delta = (self.x[p] - target) / row[q]
            self.x[self.basis] -= delta * self.T[:, q]
            self.x[q] += delta
            self._pivot(r, q)
            self.status[p] = AT_LB if low else AT_UB
            self.x[p] = target

    def _dual_feasible(self) -> bool:
        st, d = self.status, self.d
        fixed = self.lb == self.ub
        bad = (((st == AT_LB) & (d < -1e-7)) | ((st == AT_UB) & (d > 1e-7))
               | ((st == FREE0) & (np.abs(d) > 1e-7))) & ~fixed
        return not bad.any()

    # -- drivers -----------------------------------------------------------
    def solve_cold(self) -> None:
        """Two-phase primal simplex from the slack basis."""
        m, n = self.m, self.n
        self.status = self._default_status()
        slack0 = n - m
        self.basis = np.arange(slack0, n)
        self.status[self.basis] = BASIC
        x_nb = np.array([self._nonbasic_value(j) if j < slack0 else 0.0 for j in range(n)])
        resid = self.b - self.A[:, :slack0] @ x_nb[:slack0]
        need = []
        for r in range(m):
            j = slack0 + r
            if resid[r] < self.lb[j] - FEAS_TOL or resid[r] > self.ub[j] + FEAS_TOL:
                need.append(r)
        if need:
            # artificial columns carry the residual; slacks sit at a bound
            k = len(need)
            sign = np.zeros(k)
            art = np.zeros((m, k))
            for a, r in enumerate(need):
                j = slack0 + r
                self.status[j] = AT_LB if resid[r] < self.lb[j] else AT_UB
                bound = self.lb[j] if self.status[j] == AT_LB else self.ub[j]
                sign[a] = 1.0 if resid[r] - bound > 0 else -1.0
                art[r, a] = sign[a]
            A0, lb0, ub0 = self.A, self.lb, self.ub
            self.A = np.hstack([A0, art])
            self.lb = np.concatenate([lb0, np.zeros(k)])
            self.ub = np.concatenate([ub0, np.full(k, INF)])
            self.status = np.concatenate([self.status, np.full(k, AT_LB, dtype=np.int8)])
            for a, r in enumerate(need):
                self.status[slack0 + r] = self.status[slack0 + r]
                self.basis[r] = n + a
                self.status[n + a] = BASIC
            self.n = n + k
            cost1 = np.concatenate([np.zeros(n), np.ones(k)])
            self._refactor(cost1)
            self._primal(cost1)
            infeas = float(np.sum(self.x[n:]))
            if infeas > 1e-7 * max(1.0, float(np.max(np.abs(self.b), initial=0.0))):
                raise _Infeasible()
            # retire artificials: pinned at zero, never re-enter
            self.ub[n:] = 0.0
            self._drive_out_artificials(n)
            self.A, self.lb, self.ub = A0, lb0, ub0
            self.status = self.status[:n]
            self.n = n
            self.x = self.x[:n]
        self._refactor(self.c)
        self._primal(self.c)
        self._finish()

    def _drive_out_artificials(self, n: int) -> None:
        for r in range(self.m):
            if self.basis[r] < n:
                continue
            row = self.T[r, :n]
            cand = np.flatnonzero((np.abs(row) > 1e-7) & (self.status[:n] != BASIC))
            if cand.size == 0:
                raise SolverError("redundant equality rows are not supported by the slack layout")
            q = int(cand[np.argmax(np.abs(row[cand]))])
            a = self.basis[r]
            delta = (self.x[a] - 0.0) / self.T[r, q]
            self.x[self.basis] -= delta * self.T[:, q]
            self.x[q] += delta
            self._pivot(r, q)
            self.status[a] = AT_LB
            self.x[a] = 0.0
        # any remaining drift is cleaned by the refactor that follows

    def solve_warm(self, basis: np.ndarray, status: np.ndarray) -> None:
        """Re-solve after bound changes starting from a previous optimal basis."""
        self.basis = basis.copy()
        self.status = status.copy()
        self._fix_status()
        self._refactor(self.c)
        if not self._dual_feasible():
            raise _Stalled()
        self._dual()
        self._primal(self.c)
        self._finish()

    def _finish(self) -> None:
        self._refactor(self.c)
        xb = self.x[self.basis]
        viol = np.maximum(self.lb[self.basis] - xb, xb - self.ub[self.basis])
        scale = 1.0 + np.abs(xb)
        if self.m and float(np.max(viol / scale)) > 1e-7:
            # drift after refactor; a short dual pass restores feasibility
            if self._dual_feasible():
                self._dual()
                self._primal(self.c)
                self._refactor(self.c)
            else:
                self._primal(self.c)

    @property
    def objective(self) -> float:
        return float(self.c @ self.x)

    def dual_bound(self) -> float:
        """Lagrangian bound from the final duals: pi.b + sum of reduced-cost bound terms."""
        pi = self.c[self.basis] @ np.linalg.solve(self.A[:, self.basis], np.eye(self.m)) if self.m else np.zeros(0)
        d = self.c - pi @ self.A
        val = float(pi @ self.b)
        tol = OPT_TOL * max(1.0, float(np.max(np.abs(self.c), initial=0.0)))
        d[np.abs(d) <= tol] = 0.0
        for j in range(self.n):
            if d[j] > 0:
                if self.lb[j] == -INF:
                    return -INF
                val += d[j] * self.lb[j]
            elif d[j] < 0:
                if self.ub[j] == INF:
                    return -INF
                val += d[j] * self.ub[j]
        return val


def _scale(A: np.ndarray, passes: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Geometric-mean row/column equilibration; returns (row, col) factors."""
    m, n = A.shape
    rs = np.ones(m)
    cs = np.ones(n)
    absA = np.abs(A)
    for _ in range(passes):
        S = absA * rs[:, None] * cs[None, :]
        with np.errstate(divide="ignore"):
            logS = np.where(S > 0, np.log(S), np.nan)
        rmin = np.nanmin(np.where(np.isnan(logS), np.inf, logS), axis=1)
        rmax = np.nanmax(np.where(np.isnan(logS), -np.inf, logS), axis=1)
        ok = np.isfinite(rmin)
        rs[ok] *= np.exp(-(rmin[ok] + rmax[ok]) / 2)
        S = absA * rs[:, None] * cs[None, :]
        with np.errstate(divide="ignore"):
            logS = np.where(S > 0, np.log(S), np.nan)
        cmin = np.nanmin(np.where(np.isnan(logS), np.inf, logS), axis=0)
        cmax = np.nanmax(np.where(np.isnan(logS), -np.inf, logS), axis=0)
        ok = np.isfinite(cmin)
        cs[ok] *= np.exp(-(cmin[ok] + cmax[ok]) / 2)
    # powers of two keep scaling exact in floating point
    rs = np.exp2(np.round(np.log2(rs)))
    cs = np.exp2(np.round(np.log2(cs)))
    return rs, cs


class _LPInstance:
    """Scaled equality form of a program, shared by every node of a search."""

    def __init__(self, mip: MixedIntegerProgram):
        c, A, senses, b, lb, ub, integer = mip.arrays()
        m, n = A.shape
        self.n_orig = n
        self.integer = integer
        rs, cs = _scale(A) if m and n else (np.ones(m), np.ones(n))
        self.rs, self.cs = rs, cs
        As = A * rs[:, None] * cs[None, :]
        slack_lb = np.empty(m)
        slack_ub = np.empty(m)
        for r, s in enumerate(senses):
            if s == "<=":
                slack_lb[r], slack_ub[r] = 0.0, INF
            elif s == ">=":
                slack_lb[r], slack_ub[r] = -INF, 0.0
            else:
                slack_lb[r], slack_ub[r] = 0.0, 0.0
        self.A = np.hstack([As, np.eye(m)])
        self.b = b * rs
        cscale = max(1.0, float(np.max(np.abs(c * cs), initial=0.0)))
        self.obj_scale = cscale
        self.c = np.concatenate([c * cs / cscale, np.zeros(m)])
        with np.errstate(invalid="ignore"):
            self.lb = np.concatenate([np.where(np.isfinite(lb), lb / cs, lb), slack_lb])
            self.ub = np.concatenate([np.where(np.isfinite(ub), ub / cs, ub), slack_ub])
        self.offset = mip.obj_offset
        self.c_orig = c

    def tableau(self, lb: np.ndarray | None = None, ub: np.ndarray | None = None, max_iter: int = 50_000) -> Tableau:
        tl = self.lb.copy()
        tu = self.ub.copy()
        n = self.n_orig
        if lb is not None:
            tl[:n] = lb / self.cs
        if ub is not None:
            tu[:n] = ub / self.cs
        return Tableau(self.A, self.b, self.c, tl, tu, max_iter=max_iter)

    def unscale(self, tab: Tableau) -> np.ndarray:
        return tab.x[: self.n_orig] * self.cs

    def objective(self, x: np.ndarray) -> float:
        return float(self.c_orig @ x) + self.offset


def _run_lp(inst: _LPInstance, lb=None, ub=None, warm=None, max_iter=50_000):
    """Solve one LP; returns (status, tableau or None)."""
    tab = inst.tableau(lb, ub, max_iter)
    if warm is not None:
        try:
            tab.solve_warm(*warm)
            return Status.OPTIMAL, tab
        except _Infeasible:
            return Status.INFEASIBLE, tab
        except (_Stalled, _Unbounded, SolverError):
            tab = inst.tableau(lb, ub, max_iter)
    try:
        tab.solve_cold()
    except _Infeasible:
        return Status.INFEASIBLE, tab
    except _Unbounded:
        return Status.UNBOUNDED, tab
    except _Stalled:
        return Status.ITER_LIMIT, tab
    return Status.OPTIMAL, tab


def solve_lp(mip: MixedIntegerProgram, max_iter: int = 50_000) -> SolveResult:
    """Solve the LP relaxation of ``mip`` with the bundled simplex."""
    start = time.perf_counter()
    inst = _LPInstance(mip)
    status, tab = _run_lp(inst, max_iter=max_iter)
    res = SolveResult(status, iterations=tab.iterations, handles=mip.handles)
    if status is Status.OPTIMAL:
        x = inst.unscale(tab)
        res.x = x
        res.objective = inst.objective(x)
        res.bound = res.objective
        res.dual_bound = tab.dual_bound() * inst.obj_scale + inst.offset
    res.wall_time = time.perf_counter() - start
    return res


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    lb: np.ndarray = field(compare=False)
    ub: np.ndarray = field(compare=False)
    warm: tuple | None = field(compare=False, default=None)


def solve_mip(mip: MixedIntegerProgram, rel_gap: float = 1e-6, abs_gap: float = 1e-9,
              node_limit: int | None = None, time_limit: float | None = None) -> SolveResult:
    """Best-bound branch and bound over the bundled simplex.

    Branching picks the most fractional integer column, lowest index on ties;
    open nodes are ordered by LP bound, then creation order.
    """
    start = time.perf_counter()
    inst = _LPInstance(mip)
    integer = inst.integer
    for j in np.flatnonzero(integer):
        v = mip.variables[j]
        if not (math.isfinite(v.lb) and math.isfinite(v.ub)):
            raise ValueError(f"integer column {v.name} needs finite bounds")
    lb0 = np.array([v.lb for v in mip.variables], dtype=float)
    ub0 = np.array([v.ub for v in mip.variables], dtype=float)
    # integral bounds on integer columns
    lb0[integer] = np.ceil(lb0[integer] - INT_TOL)
    ub0[integer] = np.floor(ub0[integer] + INT_TOL)

    incumbent = INF
    best_x = None
    nodes = 0
    iters = 0
    heap: list[_Node] = []
    seq = 0
    heapq.heappush(heap, _Node(-INF, seq, lb0, ub0, None))
    status = Status.OPTIMAL
    global_bound = -INF
    root_unbounded = False

    def gap_closed(bound: float) -> bool:
        return incumbent - bound <= max(abs_gap, rel_gap * max(1.0, abs(incumbent)))

    while heap:
        node = heap[0]
        global_bound = node.bound
        if incumbent < INF and gap_closed(node.bound):
            break
        if node_limit is not None and nodes >= node_limit:
            status = Status.ITER_LIMIT
            break
        if time_limit is not None and time.perf_counter() - start > time_limit:
            status = Status.ITER_LIMIT
            break
        heapq.heappop(heap)
        nodes += 1
        st, tab = _run_lp(inst, node.lb, node.ub, node.warm)
        iters += tab.iterations
        if st is Status.UNBOUNDED:
            if nodes == 1:
                root_unbounded = True
                break
            continue
        if st is not Status.OPTIMAL:
            continue
        x = inst.unscale(tab)
        obj = inst.objective(x)
        if incumbent < INF and obj >= incumbent - max(abs_gap, rel_gap * max(1.0, abs(incumbent))):
            continue
        xi = x[integer]
        frac = np.abs(xi - np.round(xi))
        if frac.size == 0 or float(np.max(frac)) <= INT_TOL:
            incumbent = obj
            xs = x.copy()
            xs[integer] = np.round(xs[integer])
            best_x = xs
            continue
        # most fractional: largest distance to nearest integer, lowest index on ties
        cols = np.flatnonzero(integer)
        dist = np.minimum(xi - np.floor(xi), np.ceil(xi) - xi)
        k = int(np.flatnonzero(dist >= float(np.max(dist)) - 1e-12)[0])
        j = int(cols[k])
        warm = (tab.basis.copy(), tab.status.copy())
        down_ub = node.ub.copy()
        down_ub[j] = math.floor(x[j])
        up_lb = node.lb.copy()
        up_lb[j] = math.ceil(x[j])
        seq += 1
        heapq.heappush(heap, _Node(obj, seq, node.lb, down_ub, warm))
        seq += 1
        heapq.heappush(heap, _Node(obj, seq, up_lb, node.ub, warm))

    res = SolveResult(status, nodes=nodes, iterations=iters, handles=mip.handles)
    if root_unbounded:
        res.status = Status.UNBOUNDED
    elif best_x is None:
        res.status = Status.INFEASIBLE if status is Status.OPTIMAL else status
    else:
        res.x = best_x
        res.objective = mip.evaluate(best_x)
        if not heap or status is Status.OPTIMAL:
            bound = min(global_bound, incumbent) if heap else incumbent
        else:
            bound = min(n.bound for n in heap)
        res.bound = bound
        if status is not Status.OPTIMAL:
            res.status = Status.GAP_LIMIT if gap_closed(bound) is False else Status.OPTIMAL
    res.wall_time = time.perf_counter() - start
    return res


# ---------------------------------------------------------------------------
# external engine adapter
# ---------------------------------------------------------------------------

def solve_mip_highs(mip: MixedIntegerProgram, rel_gap: float = 1e-6,
                    time_limit: float | None = None) -> SolveResult:
    """Same contract as :func:`solve_mip`, delegated to scipy's HiGHS."""
    from scipy.optimize import Bounds, LinearConstraint, milp

    start = time.perf_counter()
    c, A, senses, b, lb, ub, integer = mip.arrays()
    lo = np.where(senses == "<=", -INF, b)
    hi = np.where(senses == ">=", INF, b)
    cons = [LinearConstraint(A, lo, hi)] if A.shape[0] else []
    opts = {"mip_rel_gap": rel_gap, "presolve": True}
    if time_limit is not None:
        opts["time_limit"] = time_limit
    out = milp(c, constraints=cons, integrality=integer.astype(int),
               bounds=Bounds(lb, ub), options=opts)
    res = SolveResult(Status.OPTIMAL, handles=mip.handles)
    if out.status == 0 and out.x is not None:
        x = np.asarray(out.x, dtype=float)
        x[integer] = np.round(x[integer])
        res.x = x
        res.objective = mip.evaluate(x)
        dual = getattr(out, "mip_dual_bound", None)
        res.bound = float(dual) + mip.obj_offset if integer.any() and dual is not None else res.objective
        res.nodes = int(getattr(out, "mip_node_count", 0) or 0)
    elif out.status == 2:
        res.status = Status.INFEASIBLE
    elif out.status == 3:
        res.status = Status.UNBOUNDED
    else:
        res.status = Status.ITER_LIMIT
        if out.x is not None:
            res.x = np.asarray(out.x, dtype=float)
            res.objective = mip.evaluate(res.x)
    res.wall_time = time.perf_counter() - start
    return res


def solve_lp_highs(mip: MixedIntegerProgram) -> SolveResult:
    """LP relaxation through scipy's HiGHS, same contract as :func:`solve_lp`."""
    from scipy.optimize import linprog

    start = time.perf_counter()
    c, A, senses, b, lb, ub, _ = mip.arrays()
    le, ge, eq = senses == "<=", senses == ">=", senses == "="
    A_ub = np.vstack([A[le], -A[ge]])
    b_ub = np.concatenate([b[le], -b[ge]])
    out = linprog(c, A_ub=A_ub if len(b_ub) else None, b_ub=b_ub if len(b_ub) else None,
                  A_eq=A[eq] if eq.any() else None, b_eq=b[eq] if eq.any() else None,
                  bounds=list(zip(lb, ub)), method="highs")
    res = SolveResult(Status.OPTIMAL, handles=mip.handles, iterations=int(getattr(out, "nit", 0)))
    if out.status == 0:
        res.x = np.asarray(out.x, dtype=float)
        res.objective = mip.evaluate(res.x)
        res.bound = res.dual_bound = res.objective
    else:
        res.status = {2: Status.INFEASIBLE, 3: Status.UNBOUNDED}.get(out.status, Status.ITER_LIMIT)
    res.wall_time = time.perf_counter() - start
    return res


SOLVERS = {"bundled": solve_mip, "highs": solve_mip_highs}
LP_SOLVERS = {"bundled": solve_lp, "highs": solve_lp_highs}


def get_solver(name: str = "bundled"):
    try:
        return SOLVERS[name]
    except KeyError:
        raise ValueError(f"unknown solver {name!r}; choose from {sorted(SOLVERS)}") from None


def get_lp_solver(name: str = "bundled"):
    try:
        return LP_SOLVERS[name]
    except KeyError:
        raise ValueError(f"unknown solver {name!r}; choose from {sorted(LP_SOLVERS)}") from None
