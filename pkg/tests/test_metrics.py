from __future__ import annotations

import numpy as np
import pytest

from adaptive_pldf.drive_sim import SimConfig, run_lap
from adaptive_pldf.metrics import (
    InterventionRates,
    intervention_rates,
    ir_evolution,
    ir_table_csv,
    profile_rmse,
)
from adaptive_pldf.pldf_planner import PlannerParams, SpeedProfile, plan_base_profile

from conftest import DistanceWindowSource, make_route


@pytest.fixture(scope="module")
def flat():
    route = make_route([(0, 80)], 2000, name="flat")
    return route, plan_base_profile(route, PlannerParams())


def test_pedal_ir_sums_durations(flat):
    route, profile = flat
    source = DistanceWindowSource([("gas", 300, 400, 0.5), ("gas", 800, 850, 0.5)])
    log = run_lap(route, profile, source, SimConfig())
    rates = intervention_rates(log)
    total = sum(r.duration() for r in log.records("gas"))
    assert rates.pedal_ir == pytest.approx(total / log.lap_time, abs=1e-9)
    assert rates.set_speed_ir == 0.0
    assert rates.combined_ir == pytest.approx(rates.pedal_ir)


def test_no_interventions_all_zero(flat):
    route, profile = flat
    log = run_lap(route, profile, None, SimConfig())
    rates = intervention_rates(log)
    assert rates == InterventionRates(0.0, 0.0, 0.0, rates.lap_time)


def test_pedal_ir_literal_example():
    # 30 s + 17 s of pedal time over a 210 s lap -> 47/210
    from adaptive_pldf.drive_sim import DriveLog, InterventionRecord, SimState

    dt = 0.02
    n = int(210 / dt)
    states = [
        SimState(t=i * dt, d=i * dt * 21.4, v=21.4, pldf_active=True,
                 gas=0.0, brake=0.0, set_speed_offset=0.0, active_limit=22.2, target_v=21.4)
        for i in range(n + 1)
    ]
    recs = [
        InterventionRecord("gas", 20.0, 400.0, [(400.0, 21.4)], t_end=50.0, d_end=1070.0, open=False),
        InterventionRecord("brake", 100.0, 2140.0, [(2140.0, 21.4)], t_end=117.0, d_end=2500.0, open=False),
    ]
    log = DriveLog("synthetic", "base", dt, states, recs, lap_time=210.0, complete=True, inputs=[])
    rates = intervention_rates(log)
    assert rates.pedal_ir == pytest.approx(47.0 / 210.0, abs=1e-6)
    assert rates.combined_ir == pytest.approx(47.0 / 210.0, abs=1e-6)


def test_combined_counts_overlap_once(flat):
    route, profile = flat
    # lever offset active over a span that also contains a gas press
    source = DistanceWindowSource(
        [("lever", 300, 305, 1), ("gas", 600, 700, 0.5)]
    )
    log = run_lap(route, profile, source, SimConfig())
    rates = intervention_rates(log)
    assert len(log.records("set_speed")) == 1
    assert len(log.records("gas")) == 1
    # offset stays active to the route end (single zone), so the union is
    # smaller than the plain sum
    assert rates.combined_ir < rates.pedal_ir + rates.set_speed_ir
    assert rates.combined_ir == pytest.approx(rates.set_speed_ir, abs=1e-6)
    assert rates.combined_ir <= 1.0


def test_incomplete_log_rejected(flat):
    from adaptive_pldf.drive_sim import AbortLap

    route, profile = flat

    def source(state):
        if state.d > 100:
            raise AbortLap()

    log = run_lap(route, profile, source, SimConfig())
    with pytest.raises(ValueError, match="complete"):
        intervention_rates(log)


def test_ir_evolution_rows(flat):
    route, profile = flat
    logs = [
        run_lap(route, profile, DistanceWindowSource([("gas", 300, 350 + 100 * k, 0.4)]), SimConfig())
        for k in range(3)
    ]
    rows = ir_evolution(logs)
    assert len(rows) == 3
    assert rows[0].pedal_ir < rows[1].pedal_ir < rows[2].pedal_ir
    with pytest.raises(ValueError):
        ir_evolution([])


def test_ir_csv_format():
    rows = [
        ("d00", 1, InterventionRates(0.25, 0.0, 0.25, 200.0)),
        ("d00", 2, InterventionRates(0.1, 0.05, 0.12, 201.0)),
    ]
    csv = ir_table_csv(rows)
    lines = csv.strip().split("\n")
    assert lines[0] == "driver_id,lap,pedal_ir,set_speed_ir,combined_ir,lap_time_s"
    assert lines[1].startswith("d00,1,0.25,")
    assert len(lines) == 3


def test_profile_rmse_identical_zero(demo_base):
    assert profile_rmse(demo_base, demo_base) == 0.0


def test_profile_rmse_constant_gap(demo_base):
    other = demo_base.with_values(demo_base.values + 2.0)
    assert profile_rmse(demo_base, other) == pytest.approx(2.0, abs=1e-12)


def test_profile_rmse_brute_force():
    rng = np.random.default_rng(3)
    a_vals = rng.uniform(5, 30, 400)
    b_vals = rng.uniform(5, 30, 400)
    a = SpeedProfile(0.0, 1.0, a_vals)
    b = SpeedProfile(0.0, 1.0, b_vals)
    acc = 0.0
    for x, y in zip(a_vals, b_vals):
        acc += (x - y) ** 2
    expected = (acc / 400) ** 0.5
    assert profile_rmse(a, b) == pytest.approx(expected, abs=1e-12)


def test_profile_rmse_grid_mismatch():
    a = SpeedProfile(0.0, 1.0, np.full(10, 5.0))
    b = SpeedProfile(0.0, 2.0, np.full(10, 5.0))
    with pytest.raises(ValueError, match="grid"):
        profile_rmse(a, b)


def test_combined_zero_iff_parts_zero(flat):
    route, profile = flat
    source = DistanceWindowSource([("gas", 300, 340, 0.5)])
    log = run_lap(route, profile, source, SimConfig())
    r = intervention_rates(log)
    assert (r.combined_ir == 0) == (r.pedal_ir == 0 and r.set_speed_ir == 0)
    clean = run_lap(route, profile, None, SimConfig())
    rc = intervention_rates(clean)
    assert (rc.combined_ir == 0) == (rc.pedal_ir == 0 and rc.set_speed_ir == 0)
