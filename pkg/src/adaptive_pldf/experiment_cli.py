"""Command-line driver for batch experiments.

Subcommands: plan a baseline profile, run a synthetic cohort through the
static-vs-adaptive study protocol, replay the learning step on a stored drive
log, and serve live cockpit sessions. All randomness flows from one master
seed (ADAPTIVE_PLDF_SEED overrides --seed), so a study run is reproducible
byte for byte.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import spaa_core
from .drive_sim import SimConfig, drive_log_from_json, drive_log_to_json, run_lap
from .driver_model import DriverSpec, SyntheticDriver, default_cohort, load_cohort, make_preference
from .metrics import intervention_rates, ir_table_csv, profile_rmse
from .pldf_planner import (
    PlannerParams,
    SetSpeedOffsetEntry,
    SetSpeedOffsetMap,
    apply_set_speed_offsets,
    plan_base_profile,
)
from .route_map import KMH_TO_MPS, RouteError, RouteMap, demo_route, load_route_file
from .spaa_core import StretchParams, apply_iteration, initial_state


def _load_params_file(path: str) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    if path.endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:
            try:
                import tomli as tomllib
            except ModuleNotFoundError as exc:
                raise SystemExit("TOML params need Python >= 3.11 or tomli installed") from exc
        return tomllib.loads(text)
    return json.loads(text)


def _build_params(args) -> tuple[PlannerParams, StretchParams, SimConfig]:
    doc = _load_params_file(args.params) if getattr(args, "params", None) else {}
    planner = PlannerParams(**doc.get("planner", {}))
    spaa_kwargs = dict(doc.get("spaa", {}))
    if getattr(args, "max_over_limit", None) is not None:
        spaa_kwargs["max_over_limit"] = args.max_over_limit * KMH_TO_MPS
    spaa = StretchParams(**spaa_kwargs)
    sim_kwargs = dict(doc.get("sim", {}))
    if getattr(args, "tick_hz", None):
        sim_kwargs["dt"] = 1.0 / args.tick_hz
    sim = SimConfig(params=planner, **sim_kwargs)
    return planner, spaa, sim


def _load_route(args) -> RouteMap:
    if getattr(args, "route", None):
        return load_route_file(args.route)
    return demo_route()


def _parse_offset(text: str) -> SetSpeedOffsetEntry:
    try:
        start, end, kmh = text.split(":")
        return SetSpeedOffsetEntry(
            d_start=float(start), d_end=float(end), offset=float(kmh) * KMH_TO_MPS
        )
    except ValueError as exc:
        raise SystemExit(f"bad --offset {text!r}, expected start_m:end_m:offset_kmh") from exc


def cmd_plan(args) -> int:
    try:
        route = _load_route(args)
        planner, _, _ = _build_params(args)
        profile = plan_base_profile(route, planner)
        if args.offset:
            offsets = SetSpeedOffsetMap(entries=tuple(_parse_offset(o) for o in args.offset))
            profile = apply_set_speed_offsets(profile, route, offsets, planner)
    except (RouteError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out) if args.out else None
    csv = profile.to_csv()
    if out:
        out.write_text(csv, encoding="utf-8")
        print(f"wrote {out} ({len(profile)} rows)")
    else:
        sys.stdout.write(csv)
    return 0


@dataclass
class DriverResult:
    driver_id: str
    laps: list[dict]
    rmse_by_iteration: list[float]
    error: str | None = None


# Laps per driver: system A (static) twice, pretrain on the last A lap,
# system B (adaptive) twice with an update after each, one final clean lap.
def run_driver_study(
    route: RouteMap,
    spec: DriverSpec,
    planner: PlannerParams,
    spaa: StretchParams,
    sim: SimConfig,
    laps_per_system: int,
    out_dir: Path | None,
) -> DriverResult:
    base = plan_base_profile(route, planner)
    pref = make_preference(
        route,
        base,
        spec.perturb,
        spec.seed,
        params=planner,
        tol=spec.tol,
        react_delay=spec.react_delay,
        overreact_gain=spec.overreact_gain,
        set_speed_user=spec.set_speed_user,
    )
    driver = SyntheticDriver(route, pref)
    laps: list[dict] = []
    logs = []

    def record(system: str, log, k: int):
        rates = intervention_rates(log)
        laps.append(
            {
                "lap": len(laps) + 1,
                "system": system,
                "iteration": k,
                "pedal_ir": rates.pedal_ir,
                "set_speed_ir": rates.set_speed_ir,
                "combined_ir": rates.combined_ir,
                "lap_time_s": rates.lap_time,
            }
        )
        logs.append(log)

    try:
        for k in range(laps_per_system):
            driver.reset()
            log = run_lap(route, base, driver, sim, profile_id="A-base")
            if not log.complete:
                raise RuntimeError(f"system A lap {k + 1} did not finish")
            record("A", log, 0)

        state = initial_state(route, planner)
        state = apply_iteration(state, logs[-1], route, spaa, planner)

        for k in range(laps_per_system):
            driver.reset()
            log = run_lap(route, state.baseline, driver, sim, profile_id=f"B-iter{state.iteration}")
            if not log.complete:
                raise RuntimeError(f"system B lap {k + 1} did not finish")
            record("B", log, state.iteration)
            state = apply_iteration(state, log, route, spaa, planner)

        final = run_lap(route, state.baseline, None, sim, profile_id=f"final-iter{state.iteration}")
        record("final", final, state.iteration)

        rmse = [profile_rmse(h.profile, pref.v_pref) for h in state.history]
    except Exception as exc:  # a failed lap aborts only this driver
        return DriverResult(spec.driver_id, laps, [], error=str(exc))

    if out_dir is not None:
        driver_dir = out_dir / spec.driver_id
        driver_dir.mkdir(parents=True, exist_ok=True)
        for i, log in enumerate(logs):
            (driver_dir / f"lap{i + 1}.json").write_text(
                drive_log_to_json(log, downsample_10hz=True), encoding="utf-8"
            )
        spaa_core.export_history(state, driver_dir, spaa)
        (driver_dir / "v_pref.csv").write_text(pref.v_pref.to_csv(), encoding="utf-8")
    return DriverResult(spec.driver_id, laps, rmse)


def _study_worker(payload: tuple) -> DriverResult:
    route_path, spec, planner, spaa, sim, laps_per_system, out_dir = payload
    route = load_route_file(route_path) if route_path else demo_route()
    return run_driver_study(
        route, spec, planner, spaa, sim, laps_per_system, Path(out_dir) if out_dir else None
    )


def run_study(
    route_path: str | None,
    cohort: list[DriverSpec],
    planner: PlannerParams,
    spaa: StretchParams,
    sim: SimConfig,
    laps_per_system: int,
    out_dir: Path | None,
    workers: int = 1,
) -> dict:
    payloads = [
        (route_path, spec, planner, spaa, sim, laps_per_system, str(out_dir) if out_dir else None)
        for spec in cohort
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_study_worker, payloads))
    else:
        results = [_study_worker(p) for p in payloads]
    results.sort(key=lambda r: r.driver_id)

    ok = [r for r in results if r.error is None]
    failed = {r.driver_id: r.error for r in results if r.error is not None}

    def mean_ir(system: str, key: str) -> float:
        vals = [
            lap[key]
            for r in ok
            for lap in r.laps
            if lap["system"] == system
        ]
        return sum(vals) / len(vals) if vals else 0.0

    rmse_decreasing = [
        r.driver_id
        for r in ok
        if len(r.rmse_by_iteration) >= 3
        and r.rmse_by_iteration[0] > r.rmse_by_iteration[1] > r.rmse_by_iteration[2]
    ]
    summary = {
        "drivers": len(results),
        "failed": failed,
        "laps_per_system": laps_per_system,
        "mean_ir": {
            "A": {k: mean_ir("A", k) for k in ("pedal_ir", "set_speed_ir", "combined_ir")},
            "B": {k: mean_ir("B", k) for k in ("pedal_ir", "set_speed_ir", "combined_ir")},
            "final": {k: mean_ir("final", k) for k in ("pedal_ir", "set_speed_ir", "combined_ir")},
        },
        "rmse_by_iteration": {r.driver_id: r.rmse_by_iteration for r in ok},
        "rmse_strictly_decreasing": rmse_decreasing,
        "per_driver": {r.driver_id: r.laps for r in results},
    }
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        rows = [
            (r.driver_id, lap["lap"], intervention_rates_row(lap))
            for r in results
            for lap in r.laps
        ]
        (out_dir / "ir_evolution.csv").write_text(ir_table_csv(rows), encoding="utf-8")
        (out_dir / "summary.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True), encoding="utf-8"
        )
    return summary


def intervention_rates_row(lap: dict):
    from .metrics import InterventionRates

    return InterventionRates(
        pedal_ir=lap["pedal_ir"],
        set_speed_ir=lap["set_speed_ir"],
        combined_ir=lap["combined_ir"],
        lap_time=lap["lap_time_s"],
    )


def cmd_study(args) -> int:
    try:
        planner, spaa, sim = _build_params(args)
        seed = int(os.environ.get("ADAPTIVE_PLDF_SEED", args.seed))
        if args.cohort:
            cohort = load_cohort(Path(args.cohort).read_text(encoding="utf-8"))
        else:
            cohort = default_cohort(n=args.drivers, master_seed=seed)
        if args.route:
            load_route_file(args.route)  # validate early
    except (RouteError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(args.out) if args.out else None
    summary = run_study(
        args.route,
        cohort,
        planner,
        spaa,
        sim,
        laps_per_system=args.laps,
        out_dir=out_dir,
        workers=args.workers,
    )
    a = summary["mean_ir"]["A"]["combined_ir"]
    b = summary["mean_ir"]["B"]["combined_ir"]
    print(f"cohort: {summary['drivers']} drivers, {len(summary['failed'])} failed")
    print(f"mean combined IR: system A {a:.4f} -> system B {b:.4f}")
    print(
        f"rmse strictly decreasing over iterations 0->2: "
        f"{len(summary['rmse_strictly_decreasing'])}/{summary['drivers'] - len(summary['failed'])}"
    )
    return 0 if not summary["failed"] else 1


def cmd_replay(args) -> int:
    try:
        route = _load_route(args)
        planner, spaa, _ = _build_params(args)
        log = drive_log_from_json(Path(args.log).read_text(encoding="utf-8"))
        if not log.complete:
            print("error: drive log is incomplete", file=sys.stderr)
            return 2
        state = initial_state(route, planner)
        state = apply_iteration(state, log, route, spaa, planner)
    except (RouteError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    csv = state.baseline.to_csv()
    if args.out:
        Path(args.out).write_text(csv, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(csv)
    return 0


def cmd_serve(args) -> int:
    from .session_service import serve

    serve(port=args.port, route_dir=args.route_dir, pace=args.pace, ui_dir=args.ui_dir)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adaptive-pldf")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="plan a baseline profile and export it as CSV")
    p.add_argument("--route", help="route JSON file (default: bundled demo route)")
    p.add_argument("--params", help="planner/SPAA params file (JSON or TOML)")
    p.add_argument("--offset", action="append", default=[], help="start_m:end_m:offset_kmh")
    p.add_argument("--out", help="output CSV path (default: stdout)")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("study", help="run a synthetic cohort through the A/B protocol")
    p.add_argument("--route", help="route JSON file (default: bundled demo route)")
    p.add_argument("--cohort", help="cohort spec JSON (default: built-in cohort)")
    p.add_argument("--drivers", type=int, default=20, help="built-in cohort size")
    p.add_argument("--laps", type=int, default=2, help="laps with interventions per system")
    p.add_argument("--seed", type=int, default=1234)
    p.add_argument("--params", help="planner/SPAA params file (JSON or TOML)")
    p.add_argument("--max-over-limit", type=float, default=None, metavar="KMH",
                   help="clamp learned profiles to legal limit + this many km/h")
    p.add_argument("--tick-hz", type=float, default=None, help="simulation tick rate")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("replay", help="apply one learning step to a stored drive log")
    p.add_argument("--log", required=True, help="drive log JSON")
    p.add_argument("--route", help="route JSON file (default: bundled demo route)")
    p.add_argument("--params", help="planner/SPAA params file (JSON or TOML)")
    p.add_argument("--max-over-limit", type=float, default=None, metavar="KMH")
    p.add_argument("--out", help="output CSV path (default: stdout)")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("serve", help="serve live cockpit sessions")
    p.add_argument("--port", type=int, default=8700)
    p.add_argument("--route-dir", default=None, help="directory of route JSON files")
    p.add_argument("--pace", type=float, default=1.0, help="real-time factor (0 = unpaced)")
    p.add_argument("--ui-dir", default=None, help="serve a static cockpit from this directory at /ui")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
