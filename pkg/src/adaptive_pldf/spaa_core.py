"""Speed Profile Adjustment Algorithm: learn a personalized profile from
recorded driver interventions.

Pedal interventions are preprocessed in two steps: the sampled span is
stretched backward along distance to also cover the states that caused the
driver to react, and a linearly decaying velocity offset re-anchors the first
sample onto the driven trace so no jump is introduced. The preprocessed trace
is then averaged with the active profile wherever it deviates, and the result
is smoothed with a second-order Savitzky-Golay filter. Set-speed lever
interventions bypass the averaging and are taken over directly, for the whole
limit segment when the lever was used right after entering it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.signal import savgol_filter

from .drive_sim import DriveLog, InterventionRecord
from .pldf_planner import (
    PlannerParams,
    SetSpeedOffsetEntry,
    SetSpeedOffsetMap,
    SpeedProfile,
    apply_set_speed_offsets,
    plan_base_profile,
)
from .route_map import RouteMap, curvature_at, legal_speed


@dataclass(frozen=True)
class StretchParams:
    alpha: float = 0.5  # stretch factor
    cap_seconds: float = 3.0  # max shift of d_0, expressed as travel time at v0
    kappa_low: float = 0.005  # 1/m, attenuation starts
    kappa_high: float = 0.02  # 1/m, attenuation reaches zero
    deviation_eps: float = 0.15  # m/s, deviation-segment threshold
    merge_gap: float = 20.0  # m, segments closer than this merge
    sg_window: float = 51.0  # m, Savitzky-Golay window
    sg_order: int = 2
    t_set_seconds: float = 5.0  # lever use within this time of a zone entry adopts the whole zone
    max_over_limit: float | None = None  # m/s; clamp learned profile to legal + this

    def __post_init__(self):
        if not 0 <= self.alpha < 1:
            raise ValueError("alpha must be in [0, 1)")
        if self.cap_seconds <= 0:
            raise ValueError("cap_seconds must be > 0")
        if not self.kappa_low < self.kappa_high:
            raise ValueError("kappa_low must be < kappa_high")
        if self.sg_order != 2:
            raise ValueError("smoothing is second-order by contract")

    def window_points(self, step: float) -> int:
        n = int(round(self.sg_window / step))
        if n % 2 == 0 or n < 5:
            raise ValueError(
                f"sg_window {self.sg_window} m at step {step} m covers {n} grid "
                "points; an odd count >= 5 is required"
            )
        return n


@dataclass(frozen=True)
class HistoryEntry:
    iteration: int
    profile: SpeedProfile
    summary: dict | None = None


@dataclass(frozen=True)
class IterationState:
    iteration: int
    baseline: SpeedProfile
    offsets: SetSpeedOffsetMap
    history: tuple[HistoryEntry, ...]


def initial_state(route: RouteMap, planner_params: PlannerParams | None = None) -> IterationState:
    params = planner_params or PlannerParams()
    base = plan_base_profile(route, params)
    return IterationState(
        iteration=0,
        baseline=base,
        offsets=SetSpeedOffsetMap(),
        history=(HistoryEntry(0, base, None),),
    )


def effective_alpha(
    rec: InterventionRecord, v0: float, route: RouteMap, p: StretchParams
) -> float:
    """Stretch factor after the 3-second shift cap and curvature attenuation."""
    d0 = rec.samples[0][0]
    dn = rec.samples[-1][0]
    span = dn - d0
    if span <= 0:
        return 0.0
    alpha = min(p.alpha, p.cap_seconds * v0 / span)
    window_lo = max(d0 - p.alpha * span, 0.0)
    kappa_max = max(
        curvature_at(route, window_lo),
        curvature_at(route, min(dn, route.length)),
        *(
            c.curvature
            for c in route.curvature
            if window_lo <= c.distance <= min(dn, route.length)
        ),
    )
    atten = (p.kappa_high - kappa_max) / (p.kappa_high - p.kappa_low)
    return alpha * min(max(atten, 0.0), 1.0)


def stretch_intervention(
    rec: InterventionRecord, alpha_eff: float
) -> list[tuple[float, float]]:
    """Shift sample distances backward: d'_i = d_i - alpha_eff * (d_n - d_i)."""
    dn = rec.samples[-1][0]
    return [(d - alpha_eff * (dn - d), v) for d, v in rec.samples]


def align_offset(
    stretched: list[tuple[float, float]], v_driver: SpeedProfile
) -> list[tuple[float, float]]:
    """Add a linearly decaying offset so the first sample meets the driven trace."""
    d0 = stretched[0][0]
    dn = stretched[-1][0]
    if dn <= d0:
        return list(stretched)
    dv = v_driver.value_at(d0) - stretched[0][1]
    span = dn - d0
    return [(d, v + dv * (1.0 - (d - d0) / span)) for d, v in stretched]


def resample_driver_trace(log: DriveLog, grid: SpeedProfile) -> SpeedProfile:
    """Driven velocity over distance, linearly resampled onto the profile grid."""
    d = np.array([s.d for s in log.states])
    v = np.array([s.v for s in log.states])
    values = np.interp(grid.distances(), d, v)
    return grid.with_values(values)


def pedal_records(log: DriveLog) -> list[InterventionRecord]:
    return [r for r in log.interventions if r.kind in ("gas", "brake")]


def build_prepro_profile(
    log: DriveLog, baseline: SpeedProfile, route: RouteMap, p: StretchParams
) -> SpeedProfile:
    """Driver trace with every pedal intervention replaced by its stretched and
    offset-aligned samples; overlapping stretched spans resolve later-wins."""
    if not log.complete:
        raise ValueError("prepro profile requires a complete lap")
    trace = resample_driver_trace(log, baseline)
    values = np.array(trace.values)
    grid_d = baseline.distances()
    for rec in pedal_records(log):
        if len(rec.samples) < 2 or rec.samples[-1][0] <= rec.samples[0][0]:
            continue
        v0 = rec.samples[0][1]
        alpha_eff = effective_alpha(rec, v0, route, p)
        pts = align_offset(stretch_intervention(rec, alpha_eff), trace)
        xs = np.array([d for d, _ in pts])
        ys = np.array([v for _, v in pts])
        keep = np.concatenate(([True], np.diff(xs) > 0))
        xs, ys = xs[keep], ys[keep]
        lo = int(np.searchsorted(grid_d, xs[0] - 1e-12))
        hi = int(np.searchsorted(grid_d, xs[-1] + 1e-12))
        if hi > lo:
            values[lo:hi] = np.interp(grid_d[lo:hi], xs, ys)
    return baseline.with_values(values)


def deviation_segments(
    baseline: SpeedProfile,
    prepro: SpeedProfile,
    p: StretchParams,
    exclude: tuple[tuple[float, float], ...] = (),
) -> list[tuple[int, int]]:
    """Maximal index runs [lo, hi) where the prepro trace deviates, with nearby
    runs merged; excluded spans never count as deviating."""
    mask = np.abs(prepro.values - baseline.values) > p.deviation_eps
    grid_d = baseline.distances()
    for d_lo, d_hi in exclude:
        mask[(grid_d >= d_lo) & (grid_d < d_hi)] = False
    runs: list[tuple[int, int]] = []
    i = 0
    n = len(mask)
    while i < n:
        if mask[i]:
            j = i
            while j < n and mask[j]:
                j += 1
            runs.append((i, j))
            i = j
        else:
            i += 1
    if not runs:
        return runs
    gap_pts = p.merge_gap / baseline.step
    merged = [runs[0]]
    for lo, hi in runs[1:]:
        if lo - merged[-1][1] < gap_pts:
            merged[-1] = (merged[-1][0], hi)
        else:
            merged.append((lo, hi))
    return merged


def blend(
    baseline: SpeedProfile,
    prepro: SpeedProfile,
    p: StretchParams,
    exclude: tuple[tuple[float, float], ...] = (),
) -> SpeedProfile:
    """Average the profiles inside deviation segments and smooth each segment
    with the second-order filter; everything else is kept bit-exact."""
    if (
        baseline.start != prepro.start
        or baseline.step != prepro.step
        or len(baseline) != len(prepro)
    ):
        raise ValueError("blend requires profiles on the same grid")
    segments = deviation_segments(baseline, prepro, p, exclude)
    if not segments:
        return baseline
    v_mean = np.array(baseline.values)
    for lo, hi in segments:
        v_mean[lo:hi] = 0.5 * (baseline.values[lo:hi] + prepro.values[lo:hi])
    window = p.window_points(baseline.step)
    out = np.array(v_mean)
    n = len(out)
    for lo, hi in segments:
        ext_lo = max(lo - window, 0)
        ext_hi = min(hi + window, n)
        chunk = v_mean[ext_lo:ext_hi]
        w = window if len(chunk) >= window else max(len(chunk) // 2 * 2 - 1, 0)
        if w <= p.sg_order:
            continue
        smoothed = savgol_filter(chunk, w, p.sg_order, mode="interp")
        out[lo:hi] = smoothed[lo - ext_lo : hi - ext_lo]
    np.maximum(out, 0.0, out=out)
    return baseline.with_values(out)


def _zone_entry_time(log: DriveLog, zone_start: float) -> float:
    for s in log.states:
        if s.d >= zone_start:
            return s.t
    return log.lap_time


def _override_entries(
    entries: tuple[SetSpeedOffsetEntry, ...], d_start: float, d_end: float
) -> list[SetSpeedOffsetEntry]:
    """Existing entries with [d_start, d_end) carved out."""
    kept: list[SetSpeedOffsetEntry] = []
    for e in entries:
        if e.d_end <= d_start or e.d_start >= d_end:
            kept.append(e)
            continue
        if e.d_start < d_start:
            kept.append(replace(e, d_end=d_start))
        if e.d_end > d_end:
            kept.append(replace(e, d_start=d_end))
    return kept


def adopt_set_speed(
    log: DriveLog, route: RouteMap, current: SetSpeedOffsetMap, p: StretchParams
) -> SetSpeedOffsetMap:
    """Turn this lap's lever interventions into offset-map entries.

    A lever use within t_set_seconds of entering a limit zone adopts the whole
    zone; otherwise the offset runs from the activation point to the zone end.
    Later records override earlier overlapping entries; a lever returned to
    zero clears the learned offsets it covers.
    """
    if not log.complete:
        raise ValueError("set-speed adoption requires a complete lap")
    entries = current.entries
    for rec in log.records("set_speed"):
        zone = route.zone_index(min(rec.d_start, route.length - 1e-9))
        zone_start, zone_end = route.zone_span(zone)
        whole = rec.t_start - _zone_entry_time(log, zone_start) <= p.t_set_seconds
        d_start = zone_start if whole else rec.d_start
        if d_start >= zone_end:
            continue
        kept = _override_entries(entries, d_start, zone_end)
        if rec.payload != 0.0:
            kept.append(
                SetSpeedOffsetEntry(
                    d_start=d_start,
                    d_end=zone_end,
                    offset=rec.payload,
                    whole_segment=whole,
                )
            )
        entries = tuple(kept)
    return SetSpeedOffsetMap(entries=entries)


def apply_iteration(
    state: IterationState,
    log: DriveLog,
    route: RouteMap,
    p: StretchParams,
    planner_params: PlannerParams | None = None,
) -> IterationState:
    """One learning step: adopt lever offsets, preprocess pedal interventions,
    blend, and install the result as the next baseline."""
    params = planner_params or PlannerParams()
    if log.route_name != route.name:
        raise ValueError(
            f"log was recorded on route {log.route_name!r}, not {route.name!r}"
        )
    if abs(state.baseline.end - route.length) > state.baseline.step:
        raise ValueError("baseline grid does not cover the route")

    new_offsets = adopt_set_speed(log, route, state.offsets, p)
    changed = tuple(e for e in new_offsets.entries if e not in set(state.offsets.entries))
    shifted = apply_set_speed_offsets(
        state.baseline, route, SetSpeedOffsetMap(entries=changed), params
    )
    prepro = build_prepro_profile(log, shifted, route, p)
    adjusted = blend(
        shifted, prepro, p, exclude=tuple((e.d_start, e.d_end) for e in changed)
    )
    if p.max_over_limit is not None:
        capped = np.array(adjusted.values)
        for i, d in enumerate(adjusted.distances()):
            lim = legal_speed(route, min(float(d), route.length - 1e-9))
            capped[i] = min(capped[i], lim + p.max_over_limit)
        adjusted = adjusted.with_values(capped)

    from .metrics import intervention_rates

    rates = intervention_rates(log)
    summary = {
        "lap_time_s": rates.lap_time,
        "pedal_ir": rates.pedal_ir,
        "set_speed_ir": rates.set_speed_ir,
        "combined_ir": rates.combined_ir,
        "interventions": len(log.interventions),
    }
    entry = HistoryEntry(state.iteration + 1, adjusted, summary)
    return IterationState(
        iteration=state.iteration + 1,
        baseline=adjusted,
        offsets=new_offsets,
        history=state.history + (entry,),
    )


def export_history(state: IterationState, out_dir: str | Path, p: StretchParams) -> Path:
    """Write per-iteration profile CSVs plus a manifest; feeds profile-development plots."""
    out = Path(out_dir)
    profiles = out / "profiles"
    profiles.mkdir(parents=True, exist_ok=True)
    manifest = {
        "iterations": [],
        "params": {
            "alpha": p.alpha,
            "cap_seconds": p.cap_seconds,
            "kappa_low": p.kappa_low,
            "kappa_high": p.kappa_high,
            "deviation_eps": p.deviation_eps,
            "merge_gap": p.merge_gap,
            "sg_window": p.sg_window,
            "sg_order": p.sg_order,
            "t_set_seconds": p.t_set_seconds,
        },
    }
    for entry in state.history:
        name = f"iter{entry.iteration}.csv"
        (profiles / name).write_text(entry.profile.to_csv(), encoding="utf-8")
        manifest["iterations"].append(
            {
                "iteration": entry.iteration,
                "profile_csv": f"profiles/{name}",
                "summary": entry.summary,
            }
        )
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    return path


def history_manifest(state: IterationState) -> dict:
    """In-memory manifest of the learning history (service /history endpoint)."""
    return {
        "iteration": state.iteration,
        "iterations": [
            {"iteration": e.iteration, "summary": e.summary} for e in state.history
        ],
        "offsets": [
            {
                "d_start_m": e.d_start,
                "d_end_m": e.d_end,
                "offset_kmh": e.offset * 3.6,
                "whole_segment": e.whole_segment,
            }
            for e in state.offsets.entries
        ],
    }
