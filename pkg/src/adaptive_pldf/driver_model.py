"""Synthetic drivers with location-based speed preferences.

A driver is a preference profile (the speed they want at each point of the
route) plus a small behavioral machine: they react with a delay once the
driven speed leaves their acceptance band, press pedals proportionally to the
error scaled by an overreaction gain, release when the error crosses zero, and
reactivate the function one reaction delay after releasing the brake. Drivers
who prefer the lever fix straight-segment offsets in 5 km/h steps. They stand
in for study participants in automated convergence experiments; no claim of
human fidelity is made.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .drive_sim import IDLE, DriverInputs, SimState
from .pldf_planner import PlannerParams, SpeedProfile, kinematic_passes
from .route_map import RouteMap, curvature_at, legal_speed

PEDAL_FULL_ERR = 4.0  # m/s error that saturates a pedal (before overreaction gain)
PEDAL_MIN = 0.15
LEVER_PERIOD = 0.4  # s between lever presses
STRAIGHT_KAPPA = 0.004  # 1/m, below this the road counts as straight
SET_STEP = 5.0 / 3.6


@dataclass(frozen=True)
class PreferenceProfile:
    v_pref: SpeedProfile
    tol: float = 1.0  # m/s acceptance band
    react_delay: float = 0.7  # s
    overreact_gain: float = 1.4
    set_speed_user: bool = False

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if self.react_delay < 0:
            raise ValueError("react_delay must be >= 0")
        if self.overreact_gain < 1:
            raise ValueError("overreact_gain must be >= 1")


@dataclass(frozen=True)
class PerturbationSpec:
    """Which preference deviations to synthesize, mirroring the common
    intervention categories: straight speeds, accel/decel timing, curve
    speeds, and accel/decel strength."""

    n_curves: int = 0
    curve_delta_kmh: tuple[float, float] = (5.0, 15.0)
    n_transitions: int = 0
    transition_shift_m: tuple[float, float] = (50.0, 150.0)
    n_straights: int = 0
    straight_offset_kmh: tuple[float, ...] = (5.0, 10.0)
    accel_scale: float = 1.0
    decel_scale: float = 1.0

    @classmethod
    def from_dict(cls, doc: dict) -> "PerturbationSpec":
        kwargs = {}
        for name in (
            "n_curves",
            "curve_delta_kmh",
            "n_transitions",
            "transition_shift_m",
            "n_straights",
            "straight_offset_kmh",
            "accel_scale",
            "decel_scale",
        ):
            if name in doc:
                val = doc[name]
                kwargs[name] = tuple(val) if isinstance(val, list) else val
        return cls(**kwargs)


def _curve_limited_runs(route: RouteMap, baseline: SpeedProfile, params: PlannerParams) -> list[tuple[int, int]]:
    """Index runs where the baseline target is governed by curvature, not the limit."""
    from .pldf_planner import curve_speed_limit

    runs = []
    in_run = False
    lo = 0
    for i, d in enumerate(baseline.distances()):
        d = min(float(d), route.length)
        cap = curve_speed_limit(curvature_at(route, d), params)
        lim = legal_speed(route, min(d, route.length - 1e-9))
        limited = cap < lim
        if limited and not in_run:
            in_run, lo = True, i
        elif not limited and in_run:
            in_run = False
            runs.append((lo, i))
    if in_run:
        runs.append((lo, len(baseline)))
    return runs


def make_preference(
    route: RouteMap,
    baseline: SpeedProfile,
    spec: PerturbationSpec,
    seed: int,
    params: PlannerParams | None = None,
    tol: float = 1.0,
    react_delay: float = 0.7,
    overreact_gain: float = 1.4,
    set_speed_user: bool = False,
) -> PreferenceProfile:
    """Perturb the baseline in a seeded random subset of locations and re-run
    the kinematic passes with the (possibly scaled) accel/decel strengths so
    the preference is a drivable profile."""
    from .pldf_planner import curve_speed_limit

    params = params or PlannerParams()
    rng = np.random.default_rng(seed)
    target = np.array(baseline.values)
    ds = baseline.distances()

    if spec.n_straights:
        zones = list(range(len(route.limit_zones)))
        picks = rng.choice(len(zones), size=min(spec.n_straights, len(zones)), replace=False)
        for k in picks:
            z_lo, z_hi = route.zone_span(int(k))
            lim = route.limit_zones[int(k)].limit
            off = float(rng.choice(spec.straight_offset_kmh)) / 3.6 * rng.choice((-1.0, 1.0))
            sel = (ds >= z_lo) & (ds < z_hi)
            caps = np.array(
                [
                    curve_speed_limit(curvature_at(route, float(d)), params)
                    for d in ds[sel]
                ]
            )
            target[sel] = np.maximum(np.minimum(lim + off, caps), 3.0)

    curve_runs = _curve_limited_runs(route, baseline, params)
    if spec.n_curves and curve_runs:
        picks = rng.choice(len(curve_runs), size=min(spec.n_curves, len(curve_runs)), replace=False)
        for k in picks:
            lo, hi = curve_runs[int(k)]
            delta = rng.uniform(*spec.curve_delta_kmh) / 3.6 * rng.choice((-1.0, 1.0))
            target[lo:hi] = np.maximum(target[lo:hi] + delta, 3.0)

    drops = [
        i
        for i in range(1, len(route.limit_zones))
        if route.limit_zones[i].limit < route.limit_zones[i - 1].limit
    ]
    if spec.n_transitions and drops:
        picks = rng.choice(len(drops), size=min(spec.n_transitions, len(drops)), replace=False)
        for k in picks:
            zi = drops[int(k)]
            sign_d = route.limit_zones[zi].start
            shift = rng.uniform(*spec.transition_shift_m) * rng.choice((-1.0, 1.0))
            lo_lim = route.limit_zones[zi].limit
            hi_lim = route.limit_zones[zi - 1].limit
            if shift < 0:  # decelerate earlier: the lower limit begins sooner
                sel = (ds >= sign_d + shift) & (ds < sign_d)
                target[sel] = np.minimum(target[sel], lo_lim)
            else:  # decelerate later: carry the higher limit past the sign
                sel = (ds >= sign_d) & (ds < sign_d + shift)
                target[sel] = np.maximum(target[sel], np.minimum(hi_lim, target[sel] + (hi_lim - lo_lim)))

    pass_params = PlannerParams(
        a_accel_max=params.a_accel_max * spec.accel_scale,
        a_decel_max=params.a_decel_max * spec.decel_scale,
        a_lat_max=params.a_lat_max,
        grid_step=params.grid_step,
    )
    v_pref = baseline.with_values(kinematic_passes(target, pass_params))
    return PreferenceProfile(
        v_pref=v_pref,
        tol=tol,
        react_delay=react_delay,
        overreact_gain=overreact_gain,
        set_speed_user=set_speed_user,
    )


class SyntheticDriver:
    """Tick-wise input source for run_lap; holds the reaction timer state."""

    def __init__(self, route: RouteMap, pref: PreferenceProfile):
        self.route = route
        self.pref = pref
        self.reset()

    def reset(self):
        self._err_since: float | None = None
        self._mode: str | None = None
        self._react_at = 0.0
        self._next_lever_t = 0.0

    def _is_straight(self, d: float) -> bool:
        probe = min(d + 100.0, self.route.length)
        return (
            curvature_at(self.route, min(d, self.route.length)) < STRAIGHT_KAPPA
            and curvature_at(self.route, probe) < STRAIGHT_KAPPA
        )

    def _pedal(self, err: float) -> float:
        mag = self.pref.overreact_gain * abs(err) / PEDAL_FULL_ERR
        return min(max(mag, PEDAL_MIN), 1.0)

    def __call__(self, state: SimState) -> DriverInputs:
        pref = self.pref
        d = min(state.d, self.route.length)
        err = state.v - pref.v_pref.value_at(d)  # > 0: faster than preferred

        if self._mode == "gas":
            if err >= 0:
                self._mode = None
                self._err_since = None
                return IDLE
            return DriverInputs(gas=self._pedal(err))

        if self._mode == "brake":
            if err <= 0:
                self._mode = "await_react"
                self._react_at = state.t + pref.react_delay
                return IDLE
            return DriverInputs(brake=self._pedal(err))

        if self._mode == "await_react":
            if state.t >= self._react_at:
                self._mode = None
                self._err_since = None
                return DriverInputs(reactivate=True)
            return IDLE

        if self._mode == "lever":
            presses = round((pref.v_pref.value_at(d) - state.target_v) / SET_STEP)
            if presses == 0 or not state.pldf_active:
                self._mode = None
                self._err_since = None
                return IDLE
            if state.t >= self._next_lever_t:
                self._next_lever_t = state.t + LEVER_PERIOD
                return DriverInputs(lever_presses=1 if presses > 0 else -1)
            return IDLE

        if abs(err) > pref.tol:
            if self._err_since is None:
                self._err_since = state.t
            if state.t - self._err_since >= pref.react_delay:
                target_gap = pref.v_pref.value_at(d) - state.target_v
                if (
                    pref.set_speed_user
                    and state.pldf_active
                    and self._is_straight(d)
                    and round(target_gap / SET_STEP) != 0
                ):
                    self._mode = "lever"
                    self._next_lever_t = state.t
                elif state.pldf_active and abs(target_gap) <= pref.tol:
                    # the target is already right; the transient will settle
                    return IDLE
                else:
                    self._mode = "gas" if err < 0 else "brake"
                return self(state)
        else:
            self._err_since = None
        return IDLE


@dataclass(frozen=True)
class DriverSpec:
    driver_id: str
    seed: int
    perturb: PerturbationSpec
    tol: float = 1.0
    react_delay: float = 0.7
    overreact_gain: float = 1.4
    set_speed_user: bool = False

    @classmethod
    def from_dict(cls, doc: dict) -> "DriverSpec":
        return cls(
            driver_id=str(doc["id"]),
            seed=int(doc["seed"]),
            perturb=PerturbationSpec.from_dict(doc.get("perturb", {})),
            tol=float(doc.get("tol_mps", 1.0)),
            react_delay=float(doc.get("react_delay_s", 0.7)),
            overreact_gain=float(doc.get("overreact_gain", 1.4)),
            set_speed_user=bool(doc.get("set_speed_user", False)),
        )


def load_cohort(source: str) -> list[DriverSpec]:
    doc = json.loads(source)
    return [DriverSpec.from_dict(item) for item in doc["drivers"]]


def default_cohort(n: int = 20, master_seed: int = 1234) -> list[DriverSpec]:
    """Seeded cohort exercising each intervention category."""
    rng = np.random.default_rng(master_seed)
    specs = []
    for i in range(n):
        kind = i % 4
        seed = int(rng.integers(0, 2**31 - 1))
        if kind == 0:  # curve speeds
            perturb = PerturbationSpec(n_curves=2, curve_delta_kmh=(8.0, 15.0))
            lever = False
        elif kind == 1:  # decel timing at limit drops
            perturb = PerturbationSpec(n_transitions=2, transition_shift_m=(60.0, 150.0))
            lever = False
        elif kind == 2:  # straight speeds via the lever
            perturb = PerturbationSpec(n_straights=2, straight_offset_kmh=(5.0, 10.0))
            lever = True
        else:  # mixed, with pedal-only straights
            perturb = PerturbationSpec(
                n_curves=1,
                curve_delta_kmh=(8.0, 12.0),
                n_straights=1,
                straight_offset_kmh=(10.0,),
            )
            lever = False
        specs.append(
            DriverSpec(
                driver_id=f"d{i:02d}",
                seed=seed,
                perturb=perturb,
                set_speed_user=lever,
            )
        )
    return specs
