"""Baseline speed profile planning for the predictive longitudinal function.

The planner turns a route into a velocity-over-distance profile on a uniform
grid: the pointwise target is the minimum of the legal limit and the curve
speed cap, a backward pass pulls speed down early enough to reach each lower
constraint exactly at its position, and a forward pass delays acceleration
until a higher limit has been passed. Set-speed offsets re-plan the affected
spans against the shifted limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .route_map import MAX_SPEED_MPS, RouteMap, curvature_at, legal_speed


@dataclass(frozen=True)
class PlannerParams:
    a_accel_max: float = 1.2  # m/s^2, comfort acceleration
    a_decel_max: float = 1.5  # m/s^2, comfort deceleration (positive)
    a_lat_max: float = 3.0  # m/s^2, lateral comfort limit in curves
    grid_step: float = 1.0  # m

    def __post_init__(self):
        for name in ("a_accel_max", "a_decel_max", "a_lat_max", "grid_step"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.grid_step > 5.0:
            raise ValueError("grid_step must be <= 5 m")


@dataclass(frozen=True, eq=False)
class SpeedProfile:
    """Velocity over distance on a uniform grid; start + i*step for values[i]."""

    start: float
    step: float
    values: np.ndarray = field(hash=False)

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be > 0")
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 1 or len(vals) < 2:
            raise ValueError("profile needs at least 2 grid values")
        if np.any(vals < 0):
            raise ValueError("profile velocities must be >= 0")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def end(self) -> float:
        return self.start + (len(self.values) - 1) * self.step

    def distances(self) -> np.ndarray:
        return self.start + self.step * np.arange(len(self.values))

    def value_at(self, d: float) -> float:
        """Linear interpolation, clamped to the first/last grid value."""
        x = (d - self.start) / self.step
        if x <= 0:
            return float(self.values[0])
        n = len(self.values) - 1
        if x >= n:
            return float(self.values[n])
        i = int(x)
        t = x - i
        return float((1.0 - t) * self.values[i] + t * self.values[i + 1])

    def index_at(self, d: float) -> int:
        """Nearest grid index at or below d, clamped into range."""
        i = int(math.floor((d - self.start) / self.step + 1e-9))
        return min(max(i, 0), len(self.values) - 1)

    def with_values(self, values: np.ndarray) -> "SpeedProfile":
        return SpeedProfile(start=self.start, step=self.step, values=values)

    def to_csv(self) -> str:
        lines = ["d_m,v_mps,v_kmh"]
        for d, v in zip(self.distances(), self.values):
            lines.append(f"{float(d)!r},{float(v)!r},{float(v) * 3.6!r}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SetSpeedOffsetEntry:
    d_start: float
    d_end: float
    offset: float  # m/s
    whole_segment: bool = False

    def __post_init__(self):
        if not self.d_start < self.d_end:
            raise ValueError("offset span must have d_start < d_end")


@dataclass(frozen=True)
class SetSpeedOffsetMap:
    entries: tuple[SetSpeedOffsetEntry, ...] = ()

    def __post_init__(self):
        ordered = tuple(sorted(self.entries, key=lambda e: e.d_start))
        for a, b in zip(ordered, ordered[1:]):
            if b.d_start < a.d_end:
                raise ValueError(
                    f"overlapping offset spans at {b.d_start} < {a.d_end}"
                )
        object.__setattr__(self, "entries", ordered)

    def __len__(self) -> int:
        return len(self.entries)


def curve_speed_limit(kappa: float, params: PlannerParams) -> float:
    """Steady-state lateral-acceleration speed cap; unbounded straights cap at 70 m/s."""
    if kappa < 0:
        raise ValueError("curvature must be >= 0")
    if kappa == 0:
        return MAX_SPEED_MPS
    return min(math.sqrt(params.a_lat_max / kappa), MAX_SPEED_MPS)


def _grid(route: RouteMap, params: PlannerParams) -> np.ndarray:
    n = int(math.floor(route.length / params.grid_step + 1e-9)) + 1
    return params.grid_step * np.arange(n)


def _pointwise_target(route: RouteMap, params: PlannerParams) -> np.ndarray:
    ds = _grid(route, params)
    target = np.empty(len(ds))
    for i, d in enumerate(ds):
        lim = legal_speed(route, min(float(d), route.length - 1e-9))
        cap = curve_speed_limit(curvature_at(route, float(d)), params)
        target[i] = min(lim, cap)
    return target


def kinematic_passes(values: np.ndarray, params: PlannerParams) -> np.ndarray:
    """Backward deceleration pass then forward acceleration pass over the grid."""
    v = np.array(values, dtype=float)
    step = params.grid_step
    dec2 = 2.0 * params.a_decel_max * step
    acc2 = 2.0 * params.a_accel_max * step
    for i in range(len(v) - 2, -1, -1):
        reach = math.sqrt(v[i + 1] * v[i + 1] + dec2)
        if v[i] > reach:
            v[i] = reach
    for i in range(len(v) - 1):
        reach = math.sqrt(v[i] * v[i] + acc2)
        if v[i + 1] > reach:
            v[i + 1] = reach
    return v


def plan_base_profile(route: RouteMap, params: PlannerParams) -> SpeedProfile:
    """Baseline profile: predictive deceleration onto each constraint drop,
    acceleration only after a higher limit."""
    target = _pointwise_target(route, params)
    return SpeedProfile(start=0.0, step=params.grid_step, values=kinematic_passes(target, params))


def apply_set_speed_offsets(
    profile: SpeedProfile,
    route: RouteMap,
    offsets: SetSpeedOffsetMap,
    params: PlannerParams,
) -> SpeedProfile:
    """Re-plan offset spans against the shifted legal limit.

    Inside each span the target becomes min(legal + offset, curve cap). The
    span boundaries are spliced kinematically: deceleration is pulled ahead of
    a slower span and acceleration ramps into a faster one, but the passes stop
    as soon as they no longer bind, so the profile outside the spans (including
    learned behavior steeper than the comfort limits) is untouched. Applying
    the same map twice is a no-op.
    """
    if not offsets.entries:
        return profile
    v = np.array(profile.values, dtype=float)
    ds = profile.distances()
    n = len(v)
    step = profile.step
    dec2 = 2.0 * params.a_decel_max * step
    acc2 = 2.0 * params.a_accel_max * step
    spans: list[tuple[int, int]] = []
    for entry in offsets.entries:
        if entry.d_start < 0 or entry.d_end > route.length:
            raise ValueError(
                f"offset span [{entry.d_start}, {entry.d_end}) outside route"
            )
        lo = int(np.searchsorted(ds, entry.d_start - 1e-9))
        hi = min(int(np.searchsorted(ds, entry.d_end - 1e-9)), n)
        if hi <= lo:
            continue
        for i in range(lo, hi):
            d = float(ds[i])
            lim = legal_speed(route, min(d, route.length - 1e-9)) + entry.offset
            cap = curve_speed_limit(curvature_at(route, d), params)
            v[i] = max(min(lim, cap), 0.0)
        spans.append((lo, hi))
    # Splice only after every span target is written, so adjacent spans anchor
    # against each other's shifted values rather than stale ones.
    for lo, hi in spans:
        i = hi - 1
        while i >= 0:
            nxt = v[i + 1] if i + 1 < n else v[i]
            reach = math.sqrt(nxt * nxt + dec2)
            if v[i] > reach:
                v[i] = reach
            elif i < lo:
                break
            i -= 1
        i = lo
        while i < n:
            prv = v[i - 1] if i > 0 else v[i]
            reach = math.sqrt(prv * prv + acc2)
            if v[i] > reach:
                v[i] = reach
            elif i >= hi:
                break
            i += 1
    return profile.with_values(v)


def lap_time_estimate(profile: SpeedProfile) -> float:
    """Trapezoidal time integral of the profile (s); assumes v > 0 on the grid."""
    v = profile.values
    v_avg = np.maximum(0.5 * (v[1:] + v[:-1]), 1e-3)
    return float(np.sum(profile.step / v_avg))
