"""Intervention rates and profile-distance metrics.

An intervention rate is the fraction of a drive's duration during which an
intervention of the given kind was active. Pedal time is the union of gas and
brake record spans (a brake record runs from the press through manual
reactivation); set-speed time counts only offsets newly applied during the
lap, since adopted offsets from earlier iterations are part of the profile and
no longer interventions. The combined rate measures the union across kinds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .drive_sim import DriveLog
from .pldf_planner import SpeedProfile


@dataclass(frozen=True)
class InterventionRates:
    pedal_ir: float
    set_speed_ir: float
    combined_ir: float
    lap_time: float


def _active_ticks(log: DriveLog, kinds: tuple[str, ...]) -> np.ndarray:
    ticks = np.zeros(max(len(log.states) - 1, 0), dtype=bool)
    dt = log.dt
    for rec in log.interventions:
        if rec.kind not in kinds:
            continue
        lo = int(round(rec.t_start / dt))
        hi = int(round(rec.t_end / dt))
        ticks[max(lo, 0) : min(hi, len(ticks))] = True
    return ticks


def intervention_rates(log: DriveLog) -> InterventionRates:
    if not log.complete:
        raise ValueError("intervention rates require a complete lap")
    n_ticks = len(log.states) - 1
    if n_ticks <= 0 or log.lap_time <= 0:
        return InterventionRates(0.0, 0.0, 0.0, 0.0)
    pedal = _active_ticks(log, ("gas", "brake"))
    lever = _active_ticks(log, ("set_speed",))
    scale = log.dt / log.lap_time
    return InterventionRates(
        pedal_ir=float(pedal.sum()) * scale,
        set_speed_ir=float(lever.sum()) * scale,
        combined_ir=float((pedal | lever).sum()) * scale,
        lap_time=log.lap_time,
    )


def ir_evolution(history: list[DriveLog]) -> list[InterventionRates]:
    if not history:
        raise ValueError("need at least one drive log")
    return [intervention_rates(log) for log in history]


def ir_table_csv(rows: list[tuple[str, int, InterventionRates]]) -> str:
    """CSV rows of (driver_id, lap index, rates)."""
    lines = ["driver_id,lap,pedal_ir,set_speed_ir,combined_ir,lap_time_s"]
    for driver_id, lap, r in rows:
        lines.append(
            f"{driver_id},{lap},{r.pedal_ir!r},{r.set_speed_ir!r},"
            f"{r.combined_ir!r},{r.lap_time!r}"
        )
    return "\n".join(lines) + "\n"


def profile_rmse(a: SpeedProfile, b: SpeedProfile) -> float:
    if a.start != b.start or a.step != b.step or len(a) != len(b):
        raise ValueError("profiles must share a grid")
    diff = a.values - b.values
    return float(math.sqrt(np.mean(diff * diff)))
