"""Fixed-timestep longitudinal lap simulation with driver-intervention semantics.

One lap = one LapRunner: a tracking controller follows the active speed
profile; gas overrides it until release, brake deactivates it until manual
reactivation, and the set-speed lever shifts the tracked target in 5 km/h
steps until the next limit change. Every tick is recorded, interventions are
bookkept as records with their (distance, velocity) samples, and the applied
input timeline is kept so a lap can be replayed bit-exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

from .pldf_planner import PlannerParams, SpeedProfile, curve_speed_limit
from .route_map import RouteMap, curvature_at, legal_speed

SET_SPEED_STEP_MPS = 5.0 / 3.6  # one lever press


class InterventionError(RuntimeError):
    """Driver action rejected in the current state."""


class AbortLap(Exception):
    """Raised by an input source to abort the running lap."""


@dataclass(frozen=True)
class SimState:
    t: float
    d: float
    v: float
    pldf_active: bool
    gas: float
    brake: float
    set_speed_offset: float  # m/s
    active_limit: float  # m/s, legal limit at d
    target_v: float  # m/s, controller setpoint at d


@dataclass(frozen=True)
class DriverInputs:
    gas: float = 0.0
    brake: float = 0.0
    lever_presses: int = 0  # signed count of 5 km/h steps this tick
    reactivate: bool = False


IDLE = DriverInputs()


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.02
    a_gas_max: float = 2.5  # m/s^2 at full gas pedal
    a_brake_max: float = 4.0  # m/s^2 at full brake pedal
    a_drag: float = 0.3  # m/s^2 coast deceleration while deactivated
    k_p: float = 0.8  # 1/s tracking gain
    params: PlannerParams = field(default_factory=PlannerParams)
    v_start: float | None = None  # None: start at profile speed
    t_max: float | None = None  # None: 3x ideal lap time + 120 s


@dataclass
class InterventionRecord:
    kind: str  # gas | brake | set_speed
    t_start: float
    d_start: float
    samples: list[tuple[float, float]]  # ascending (d_i, v_i)
    t_end: float = 0.0
    d_end: float = 0.0
    payload: float = 0.0  # offset in m/s for set_speed records
    open: bool = True

    def close(self, t: float, d: float):
        self.t_end = t
        self.d_end = d
        self.open = False

    def duration(self) -> float:
        return self.t_end - self.t_start


@dataclass
class DriveLog:
    route_name: str
    profile_id: str
    dt: float
    states: list[SimState]
    interventions: list[InterventionRecord]
    lap_time: float
    complete: bool
    inputs: list[tuple[int, float, float, int, bool]]  # sparse applied-input timeline

    def records(self, kind: str) -> list[InterventionRecord]:
        return [r for r in self.interventions if r.kind == kind]


def reactivate_pldf(state: SimState) -> SimState:
    """Manual reactivation after a brake deactivation; rejected mid-braking."""
    if state.brake > 0:
        raise InterventionError("cannot reactivate while brake is pressed")
    if state.pldf_active:
        return state
    return replace(state, pldf_active=True)


def adjust_set_speed(state: SimState, presses: int) -> SimState:
    """Accumulate the set-speed offset in signed 5 km/h lever steps."""
    if not state.pldf_active:
        raise InterventionError("set-speed lever requires an active PLDF")
    offset = state.set_speed_offset + presses * SET_SPEED_STEP_MPS
    return replace(state, set_speed_offset=offset)


class LapRunner:
    """Steps one lap tick by tick and owns its intervention bookkeeping."""

    def __init__(
        self,
        route: RouteMap,
        profile: SpeedProfile,
        config: SimConfig | None = None,
        profile_id: str = "profile",
    ):
        self.route = route
        self.profile = profile
        self.config = config or SimConfig()
        self.profile_id = profile_id
        vals = profile.values
        self._slopes = (vals[1:] - vals[:-1]) / profile.step
        v0 = self.config.v_start
        if v0 is None:
            v0 = float(vals[0])
        self.state = SimState(
            t=0.0,
            d=0.0,
            v=v0,
            pldf_active=True,
            gas=0.0,
            brake=0.0,
            set_speed_offset=0.0,
            active_limit=legal_speed(route, 0.0),
            target_v=self._effective_target(0.0, 0.0),
        )
        self.states: list[SimState] = [self.state]
        self.interventions: list[InterventionRecord] = []
        self.inputs: list[tuple[int, float, float, int, bool]] = []
        self._open: dict[str, InterventionRecord | None] = {
            "gas": None,
            "brake": None,
            "set_speed": None,
        }
        self._tick = 0
        self._aborted = False
        if self.config.t_max is not None:
            self._t_max = self.config.t_max
        else:
            from .pldf_planner import lap_time_estimate

            self._t_max = 3.0 * lap_time_estimate(profile) + 120.0

    @property
    def finished(self) -> bool:
        return self.state.d >= self.route.length or self._aborted or self.state.t > self._t_max

    def abort(self):
        self._aborted = True

    def _legal_at(self, d: float) -> float:
        return legal_speed(self.route, min(d, self.route.length - 1e-9))

    def _slope_at(self, d: float) -> float:
        i = int((d - self.profile.start) / self.profile.step)
        return float(self._slopes[min(max(i, 0), len(self._slopes) - 1)])

    def _effective_target(self, d: float, offset: float) -> float:
        base = self.profile.value_at(d)
        if offset > 0:
            # The lever raises straight-segment speed only; curve caps still bind.
            cap = curve_speed_limit(curvature_at(self.route, min(d, self.route.length)), self.config.params)
            return min(base + offset, max(cap, base))
        if offset < 0:
            return max(base + offset, 0.0)
        return base

    def tick(self, inputs: DriverInputs = IDLE) -> SimState:
        """Apply one tick of driver inputs and advance the physics by dt."""
        cfg = self.config
        s = self.state
        gas = min(max(inputs.gas, 0.0), 1.0)
        brake = min(max(inputs.brake, 0.0), 1.0)
        if inputs.gas or inputs.brake or inputs.lever_presses or inputs.reactivate:
            self.inputs.append((self._tick, gas, brake, inputs.lever_presses, inputs.reactivate))

        if inputs.reactivate and brake == 0 and not s.pldf_active:
            s = reactivate_pldf(replace(s, brake=0.0))
        if inputs.lever_presses and s.pldf_active:
            s = adjust_set_speed(s, inputs.lever_presses)

        if brake > 0:
            a = -brake * cfg.a_brake_max
            pldf_active = False
        elif gas > 0:
            a = gas * cfg.a_gas_max
            pldf_active = s.pldf_active
        elif s.pldf_active:
            target = self._effective_target(s.d, s.set_speed_offset)
            a_ff = s.v * self._slope_at(s.d)
            a = a_ff + cfg.k_p * (target - s.v)
            a = min(max(a, -cfg.params.a_decel_max), cfg.params.a_accel_max)
            pldf_active = True
        else:
            a = -cfg.a_drag
            pldf_active = False

        v_next = max(s.v + a * cfg.dt, 0.0)
        d_next = s.d + v_next * cfg.dt
        t_next = s.t + cfg.dt

        offset = s.set_speed_offset
        if offset != 0.0:
            zone_before = self.route.zone_index(min(s.d, self.route.length - 1e-9))
            zone_after = self.route.zone_index(min(d_next, self.route.length - 1e-9))
            if zone_after != zone_before:
                offset = 0.0  # discarded at the next limit change

        new_state = SimState(
            t=t_next,
            d=d_next,
            v=v_next,
            pldf_active=pldf_active,
            gas=gas,
            brake=brake,
            set_speed_offset=offset,
            active_limit=self._legal_at(d_next),
            target_v=self._effective_target(d_next, offset),
        )
        self._bookkeep(s, new_state)
        self.state = new_state
        self.states.append(new_state)
        self._tick += 1
        return new_state

    def _bookkeep(self, prev: SimState, cur: SimState):
        # Gas: record spans the ticks with gas > 0.
        rec = self._open["gas"]
        if cur.gas > 0:
            if rec is None:
                rec = InterventionRecord("gas", prev.t, prev.d, [(prev.d, prev.v)])
                self._open["gas"] = rec
                self.interventions.append(rec)
            rec.samples.append((cur.d, cur.v))
        elif rec is not None:
            rec.close(prev.t, prev.d)
            self._open["gas"] = None

        # Brake: record spans press through manual reactivation.
        rec = self._open["brake"]
        if rec is None and cur.brake > 0:
            rec = InterventionRecord("brake", prev.t, prev.d, [(prev.d, prev.v)])
            self._open["brake"] = rec
            self.interventions.append(rec)
            rec.samples.append((cur.d, cur.v))
        elif rec is not None:
            if cur.pldf_active:
                rec.close(prev.t, prev.d)
                self._open["brake"] = None
            else:
                rec.samples.append((cur.d, cur.v))

        # Set speed: record spans the ticks with a nonzero offset.
        rec = self._open["set_speed"]
        if cur.set_speed_offset != 0.0:
            if rec is None:
                rec = InterventionRecord("set_speed", prev.t, prev.d, [(prev.d, prev.v)])
                self._open["set_speed"] = rec
                self.interventions.append(rec)
            rec.payload = cur.set_speed_offset
            rec.samples.append((cur.d, cur.v))
        elif rec is not None:
            rec.close(cur.t, cur.d)
            self._open["set_speed"] = None

    def finalize(self) -> DriveLog:
        """Close open records and assemble the DriveLog."""
        s = self.state
        for rec in self._open.values():
            if rec is not None and rec.open:
                rec.close(s.t, s.d)
        self._open = {"gas": None, "brake": None, "set_speed": None}
        complete = s.d >= self.route.length and not self._aborted
        return DriveLog(
            route_name=self.route.name,
            profile_id=self.profile_id,
            dt=self.config.dt,
            states=self.states,
            interventions=self.interventions,
            lap_time=s.t,
            complete=complete,
            inputs=self.inputs,
        )


def run_lap(
    route: RouteMap,
    profile: SpeedProfile,
    input_source=None,
    config: SimConfig | None = None,
    profile_id: str = "profile",
) -> DriveLog:
    """Drive one full lap; input_source maps SimState -> DriverInputs per tick."""
    runner = LapRunner(route, profile, config, profile_id)
    try:
        while not runner.finished:
            inputs = input_source(runner.state) if input_source is not None else IDLE
            runner.tick(inputs or IDLE)
    except AbortLap:
        runner.abort()
    return runner.finalize()


def replay_log(route: RouteMap, profile: SpeedProfile, log: DriveLog) -> DriveLog:
    """Re-run a lap from its recorded input timeline; reproduces it bit-exactly."""
    timeline = {entry[0]: entry[1:] for entry in log.inputs}
    config = SimConfig(dt=log.dt, v_start=log.states[0].v) if log.states else SimConfig(dt=log.dt)
    runner = LapRunner(route, profile, config, log.profile_id)
    tick = 0
    while not runner.finished and tick < len(log.states) - 1:
        ins = timeline.get(tick)
        runner.tick(DriverInputs(*ins) if ins else IDLE)
        tick += 1
    return runner.finalize()


def _state_doc(s: SimState) -> dict:
    return {
        "t": s.t,
        "d_m": s.d,
        "v_mps": s.v,
        "pldf_active": s.pldf_active,
        "gas": s.gas,
        "brake": s.brake,
        "offset_mps": s.set_speed_offset,
        "limit_mps": s.active_limit,
        "target_mps": s.target_v,
    }


def drive_log_to_json(log: DriveLog, downsample_10hz: bool = False) -> str:
    """JSON export; states optionally decimated to 10 Hz, interventions always full."""
    states = log.states
    if downsample_10hz and log.dt < 0.1:
        stride = max(int(round(0.1 / log.dt)), 1)
        states = states[::stride] + ([log.states[-1]] if (len(log.states) - 1) % stride else [])
    doc = {
        "route": log.route_name,
        "profile_id": log.profile_id,
        "dt": log.dt,
        "lap_time_s": log.lap_time,
        "complete": log.complete,
        "states": [_state_doc(s) for s in states],
        "interventions": [
            {
                "kind": r.kind,
                "t_start": r.t_start,
                "t_end": r.t_end,
                "d_start": r.d_start,
                "d_end": r.d_end,
                "payload_mps": r.payload,
                "samples": [[d, v] for d, v in r.samples],
            }
            for r in log.interventions
        ],
        "inputs": [[t, g, b, l, int(r)] for t, g, b, l, r in log.inputs],
    }
    return json.dumps(doc, sort_keys=True)


def drive_log_from_json(source: str) -> DriveLog:
    doc = json.loads(source)
    states = [
        SimState(
            t=s["t"],
            d=s["d_m"],
            v=s["v_mps"],
            pldf_active=s["pldf_active"],
            gas=s["gas"],
            brake=s["brake"],
            set_speed_offset=s["offset_mps"],
            active_limit=s["limit_mps"],
            target_v=s["target_mps"],
        )
        for s in doc["states"]
    ]
    interventions = []
    for r in doc["interventions"]:
        rec = InterventionRecord(
            kind=r["kind"],
            t_start=r["t_start"],
            d_start=r["d_start"],
            samples=[(d, v) for d, v in r["samples"]],
            t_end=r["t_end"],
            d_end=r["d_end"],
            payload=r["payload_mps"],
            open=False,
        )
        interventions.append(rec)
    return DriveLog(
        route_name=doc["route"],
        profile_id=doc["profile_id"],
        dt=doc["dt"],
        states=states,
        interventions=interventions,
        lap_time=doc["lap_time_s"],
        complete=doc["complete"],
        inputs=[(t, g, b, l, bool(r)) for t, g, b, l, r in doc.get("inputs", [])],
    )


def ideal_lap_time(route: RouteMap, profile: SpeedProfile) -> float:
    from .pldf_planner import lap_time_estimate

    return lap_time_estimate(profile) if profile.end >= route.length else math.inf
