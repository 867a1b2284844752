"""Facility location instance data, synthetic generators and file IO."""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PRNG_ALGORITHM = "numpy.PCG64"
MAX_REJECTIONS = 1000


class InstanceError(ValueError):
    """Raised for malformed or inconsistent instance data."""


@dataclass(frozen=True)
class RiskParams:
    """Per-stage mean-CVaR weights; index ``t - 1`` holds stage ``t``."""

    lam: tuple[float, ...]
    alpha: tuple[float, ...]

    def __post_init__(self):
        lam = tuple(float(v) for v in self.lam)
        alpha = tuple(float(v) for v in self.alpha)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "alpha", alpha)
        if len(lam) != len(alpha):
            raise InstanceError("RiskParams: lambda and alpha lengths differ")
        for v in lam:
            if not 0.0 <= v <= 1.0:
                raise InstanceError(f"RiskParams: lambda={v} outside [0, 1]")
        for v in alpha:
            if not 0.0 < v < 1.0:
                raise InstanceError(f"RiskParams: alpha={v} outside (0, 1)")

    @classmethod
    def constant(cls, T: int, lam: float = 0.5, alpha: float = 0.95) -> "RiskParams":
        return cls((lam,) * T, (alpha,) * T)

    def lam_at(self, t: int) -> float:
        return self.lam[t - 1]

    def alpha_at(self, t: int) -> float:
        return self.alpha[t - 1]


@dataclass(frozen=True, eq=False)
class Instance:
    """Costs and capacities for ``T`` stages, ``M`` sites and ``N`` customers.

    Arrays are indexed by zero-based stage: ``f[t - 1]`` is stage ``t``.
    ``demand_mean``/``demand_std`` (T x N) describe the per-stage demand
    distribution used by the tree generators; solvers never read them.
    """

    f: np.ndarray
    c: np.ndarray
    h: np.ndarray
    risk: RiskParams
    demand_mean: np.ndarray | None = None
    demand_std: np.ndarray | None = None
    coords: dict | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float)
        c = np.asarray(self.c, dtype=float)
        h = np.asarray(self.h, dtype=float)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "h", h)
        if f.ndim != 2:
            raise InstanceError("f must be a T x M array")
        T, M = f.shape
        if c.ndim != 3 or c.shape[:2] != (T, M):
            raise InstanceError(f"c must be a T x M x N array matching f; got shape {c.shape}")
        if h.shape != (T, M):
            raise InstanceError(f"h must be a T x M array; got shape {h.shape}")
        if len(self.risk.lam) != T:
            raise InstanceError(f"lambda must have length T={T}")
        for name, arr in (("f", f), ("c", c), ("h", h)):
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise InstanceError(f"{name} must be finite and nonnegative")
        N = c.shape[2]
        for name in ("demand_mean", "demand_std"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=float)
                if arr.shape != (T, N) or np.any(arr < 0):
                    raise InstanceError(f"{name} must be a nonnegative T x N array")
                object.__setattr__(self, name, arr)

    @property
    def T(self) -> int:
        return self.f.shape[0]

    @property
    def M(self) -> int:
        return self.f.shape[1]

    @property
    def N(self) -> int:
        return self.c.shape[2]

    def equal_cost_sites(self) -> bool:
        """True when f and h are constant over sites within every stage."""
        return bool(np.all(self.f == self.f[:, :1]) and np.all(self.h == self.h[:, :1]))

    def with_risk(self, lam: float | None = None, alpha: float | None = None) -> "Instance":
        r = self.risk
        new = RiskParams(tuple([lam] * self.T) if lam is not None else r.lam,
                         tuple([alpha] * self.T) if alpha is not None else r.alpha)
        return Instance(self.f, self.c, self.h, new, self.demand_mean, self.demand_std,
                        self.coords, dict(self.meta))

    def scaled(self, gamma: float) -> "Instance":
        return Instance(self.f * gamma, self.c * gamma, self.h, self.risk, self.demand_mean,
                        self.demand_std, self.coords, dict(self.meta))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return instance_to_dict(self) == instance_to_dict(other)


# ---------------------------------------------------------------------------
# demand patterns
# ---------------------------------------------------------------------------

class PatternKind(str, enum.Enum):
    CONSTANT_MEAN_CONSTANT_STD = "I"
    CONSTANT_MEAN_INCREASING_STD = "II"
    INCREASING_MEAN_CONSTANT_STD = "III"
    INCREASING_MEAN_INCREASING_STD = "IV"


@dataclass(frozen=True)
class DemandPattern:
    kind: PatternKind = PatternKind.CONSTANT_MEAN_CONSTANT_STD
    sigma: float = 0.8
    growth: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "kind", PatternKind(self.kind))
        if self.sigma < 0 or self.growth < 0:
            raise InstanceError("DemandPattern: sigma and growth must be nonnegative")


def demand_distribution(pattern: DemandPattern, nominal_d, t: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-customer (mean, std) of the stage-``t`` truncated normal."""
    if t < 1:
        raise InstanceError("stage index starts at 1")
    d = np.asarray(nominal_d, dtype=float)
    step = pattern.growth * (t - 1)
    kind = pattern.kind
    grow_mean = kind in (PatternKind.INCREASING_MEAN_CONSTANT_STD, PatternKind.INCREASING_MEAN_INCREASING_STD)
    grow_std = kind in (PatternKind.CONSTANT_MEAN_INCREASING_STD, PatternKind.INCREASING_MEAN_INCREASING_STD)
    mean = d * (1.0 + step) if grow_mean else d.copy()
    std = d * (pattern.sigma + step) if grow_std else d * pattern.sigma
    return mean, std


def sample_truncated_normal(rng: np.random.Generator, mean, std) -> np.ndarray:
    """Draw nonnegative normals by rejecting negative values (per component)."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    std = np.atleast_1d(np.asarray(std, dtype=float))
    out = rng.normal(mean, std)
    bad = out < 0
    tries = 0
    while bad.any():
        tries += 1
        if tries > MAX_REJECTIONS:
            raise InstanceError("truncated normal: rejection cap exceeded")
        out[bad] = rng.normal(mean[bad], std[bad])
        bad = out < 0
    return out


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridConfig:
    grid: int = 100
    unit_cost: float = 1.0
    fixed_cost: float = 6e4
    capacity: float = 1e5
    mean_low: float = 1000.0
    mean_high: float = 5000.0
    sigma: float = 0.8
    lam: float = 0.5
    alpha: float = 0.95
    headroom_sd: float = 4.0

    def __post_init__(self):
        for name in ("unit_cost", "fixed_cost", "capacity", "mean_low", "mean_high", "sigma", "headroom_sd"):
            if getattr(self, name) < 0:
                raise InstanceError(f"GridConfig: {name} must be nonnegative")
        if self.mean_low > self.mean_high:
            raise InstanceError("GridConfig: mean_low exceeds mean_high")
        if self.grid <= 0:
            raise InstanceError("GridConfig: grid must be positive")


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def generate_grid_instance(seed: int, T: int = 3, M: int = 6, N: int = 10,
                           config: GridConfig | None = None) -> Instance:
    """Random sites and customers on a square grid with Manhattan flow costs.

    Stage-``t`` demand means are uniform on
    ``[mean_low (2t-1), mean_high (2t-1)]`` and standard deviations are
    ``sigma`` times the mean. Mean draws are repeated until every stage has
    ``sum(mean) + headroom_sd * sum(std) <= total capacity``.
    """
    cfg = config or GridConfig()
    if min(T, M, N) < 1:
        raise InstanceError("T, M and N must be at least 1")
    rng = _rng(seed)
    fac = rng.integers(0, cfg.grid + 1, size=(M, 2))
    cus = rng.integers(0, cfg.grid + 1, size=(N, 2))
    return _grid_instance(rng, seed, T, fac, cus, cfg)


# site layout of the published six-facility, ten-customer toy network
TOY_FACILITIES = ((26, 18), (86, 29), (2, 64), (55, 92), (75, 72), (93, 87))
TOY_CUSTOMERS = ((42, 54), (96, 84), (58, 33), (14, 53), (72, 2), (4, 49), (47, 48), (64, 82), (57, 41), (63, 66))


def toy_instance(seed: int, T: int = 3, config: GridConfig | None = None) -> Instance:
    """Fixed toy layout (M=6, N=10) with seeded demand parameters."""
    cfg = config or GridConfig()
    if T < 1:
        raise InstanceError("T must be at least 1")
    inst = _grid_instance(_rng(seed), seed, T, np.array(TOY_FACILITIES), np.array(TOY_CUSTOMERS), cfg)
    inst.meta["generator"] = "toy"
    return inst


def points_instance(seed: int, facilities, customers, T: int = 3, config: GridConfig | None = None) -> Instance:
    """Grid-style instance on given site and customer coordinates (Manhattan costs)."""
    cfg = config or GridConfig()
    fac = np.asarray(facilities, dtype=float).reshape(-1, 2)
    cus = np.asarray(customers, dtype=float).reshape(-1, 2)
    if T < 1 or len(fac) < 1 or len(cus) < 1:
        raise InstanceError("need T >= 1, at least one site and one customer")
    return _grid_instance(_rng(seed), seed, T, fac, cus, cfg)


def _grid_instance(rng, seed, T: int, fac: np.ndarray, cus: np.ndarray, cfg: GridConfig) -> Instance:
    M, N = len(fac), len(cus)
    dist = np.abs(fac[:, None, :] - cus[None, :, :]).sum(axis=2).astype(float)
    c = np.broadcast_to(dist * cfg.unit_cost, (T, M, N)).copy()
    f = np.full((T, M), cfg.fixed_cost)
    h = np.full((T, M), cfg.capacity)
    stages = np.arange(1, T + 1)[:, None]
    for _ in range(MAX_REJECTIONS):
        mean = rng.uniform(cfg.mean_low * (2 * stages - 1), cfg.mean_high * (2 * stages - 1), size=(T, N))
        std = cfg.sigma * mean
        if np.all(mean.sum(axis=1) + cfg.headroom_sd * std.sum(axis=1) <= h.sum(axis=1)):
            break
    else:
        raise InstanceError("grid configuration cannot satisfy the capacity headroom rule")
    coords = {"metric": "manhattan", "facilities": fac.tolist(), "customers": cus.tolist()}
    meta = {"generator": "grid", "seed": int(seed), "prng": PRNG_ALGORITHM}
    return Instance(f, c, h, RiskParams.constant(T, cfg.lam, cfg.alpha), mean, std, coords, meta)


def instance_from_nominal(nominal_d, T: int, pattern: DemandPattern, f, c, h,
                          risk: RiskParams, coords: dict | None = None) -> Instance:
    """Stage-invariant costs plus per-stage demand parameters from a pattern."""
    f = np.asarray(f, dtype=float)
    c = np.asarray(c, dtype=float)
    h = np.asarray(h, dtype=float)
    mean = np.empty((T, len(nominal_d)))
    std = np.empty_like(mean)
    for t in range(1, T + 1):
        mean[t - 1], std[t - 1] = demand_distribution(pattern, nominal_d, t)
    return Instance(np.broadcast_to(f, (T,) + f.shape[-1:]).copy(),
                    np.broadcast_to(c, (T,) + c.shape[-2:]).copy(),
                    np.broadcast_to(h, (T,) + h.shape[-1:]).copy(),
                    risk, mean, std, coords,
                    {"generator": "nominal", "pattern": pattern.kind.value,
                     "sigma": pattern.sigma, "growth": pattern.growth})


EARTH_RADIUS_MILES = 3958.8


def great_circle(lat1, lon1, lat2, lon2) -> np.ndarray:
    """Haversine distance in miles between broadcastable coordinate arrays."""
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dphi = p2 - p1
    dlmb = np.radians(lon2) - np.radians(lon1)
    a = np.sin(dphi / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_MILES * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def load_case_study(facilities_csv, customers_csv, T: int, pattern: DemandPattern,
                    risk: RiskParams | None = None, travel_cost: float = 1e-5) -> Instance:
    """Build an instance from site/customer CSV files with great-circle costs."""
    def read(path, cols):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        for k, row in enumerate(rows):
            for col in cols:
                if col not in row or row[col] in (None, ""):
                    raise InstanceError(f"{path}: row {k + 1} missing field {col!r}")
        return rows

    fac = read(facilities_csv, ("id", "lat", "lon", "capacity", "fixed_cost"))
    cus = read(customers_csv, ("id", "lat", "lon", "nominal_demand"))
    flat = np.array([[float(r["lat"]), float(r["lon"])] for r in fac])
    clat = np.array([[float(r["lat"]), float(r["lon"])] for r in cus])
    dist = great_circle(flat[:, 0][:, None], flat[:, 1][:, None], clat[:, 0][None, :], clat[:, 1][None, :])
    nominal = np.array([float(r["nominal_demand"]) for r in cus])
    risk = risk or RiskParams.constant(T)
    coords = {"metric": "great_circle", "facilities": flat.tolist(), "customers": clat.tolist()}
    return instance_from_nominal(nominal, T, pattern,
                                 [float(r["fixed_cost"]) for r in fac],
                                 dist * travel_cost,
                                 [float(r["capacity"]) for r in fac], risk, coords)


# ---------------------------------------------------------------------------
# JSON IO
# ---------------------------------------------------------------------------

def instance_to_dict(inst: Instance) -> dict:
    out = {
        "T": inst.T, "M": inst.M, "N": inst.N,
        "f": inst.f.tolist(), "c": inst.c.tolist(), "h": inst.h.tolist(),
        "lambda": list(inst.risk.lam), "alpha": list(inst.risk.alpha),
    }
    if inst.demand_mean is not None:
        out["demand_mean"] = inst.demand_mean.tolist()
    if inst.demand_std is not None:
        out["demand_std"] = inst.demand_std.tolist()
    if inst.coords is not None:
        out["coords"] = inst.coords
    if inst.meta:
        out["meta"] = inst.meta
    return out


def _shaped(data: dict, key: str, shape: tuple) -> np.ndarray:
    if key not in data:
        raise InstanceError(f"missing field {key!r}")
    try:
        arr = np.asarray(data[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise InstanceError(f"field {key!r} is not a numeric array") from exc
    if arr.shape != shape:
        raise InstanceError(f"field {key!r} has shape {arr.shape}, expected {shape}")
    return arr


def instance_from_dict(data: dict) -> Instance:
    for key in ("T", "M", "N"):
        if key not in data:
            raise InstanceError(f"missing field {key!r}")
        if not isinstance(data[key], int) or data[key] < 1:
            raise InstanceError(f"field {key!r} must be a positive integer")
    T, M, N = data["T"], data["M"], data["N"]
    f = _shaped(data, "f", (T, M))
    c = _shaped(data, "c", (T, M, N))
    h = _shaped(data, "h", (T, M))
    lam = _shaped(data, "lambda", (T,))
    alpha = _shaped(data, "alpha", (T,))
    try:
        risk = RiskParams(tuple(lam), tuple(alpha))
    except InstanceError as exc:
        raise InstanceError(f"RiskParams: {exc}") from exc
    mean = _shaped(data, "demand_mean", (T, N)) if "demand_mean" in data else None
    std = _shaped(data, "demand_std", (T, N)) if "demand_std" in data else None
    return Instance(f, c, h, risk, mean, std, data.get("coords"), dict(data.get("meta", {})))


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=1, sort_keys=True))


def load_instance(path) -> Instance:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise InstanceError(f"{path}: top level must be an object")
    return instance_from_dict(data)


def demand_total_ok(inst: Instance) -> bool:
    """Capacity headroom rule used by the generators."""
    if inst.demand_mean is None or inst.demand_std is None:
        return True
    cap = inst.h.sum(axis=1)
    need = inst.demand_mean.sum(axis=1) + 4.0 * inst.demand_std.sum(axis=1)
    return bool(np.all(need <= cap + 1e-9))


def ceil_guard(v, tol: float = 1e-9):
    """Ceiling that ignores round-off just above an integer."""
    return np.ceil(np.asarray(v, dtype=float) - tol) if np.ndim(v) else float(math.ceil(float(v) - tol))
