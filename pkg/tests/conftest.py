from __future__ import annotations

import json

import pytest

from adaptive_pldf.drive_sim import DriverInputs, SimConfig, run_lap
from adaptive_pldf.pldf_planner import PlannerParams, plan_base_profile
from adaptive_pldf.route_map import RouteMap, demo_route, load_route
from adaptive_pldf.spaa_core import StretchParams


def make_route(
    zones_kmh: list[tuple[float, float]],
    length: float,
    curvature: list[tuple[float, float]] | None = None,
    name: str = "test-route",
) -> RouteMap:
    doc = {
        "name": name,
        "length_m": length,
        "limit_zones": [{"start_m": s, "limit_kmh": k} for s, k in zones_kmh],
        "curvature": [
            {"d_m": d, "kappa_inv_m": k} for d, k in (curvature or [(0.0, 0.0)])
        ],
    }
    return load_route(json.dumps(doc))


class DistanceWindowSource:
    """Scripted pedal inputs over distance windows: (kind, d_from, d_to, value)."""

    def __init__(self, windows, reactivate_after: float | None = None):
        self.windows = windows
        self.reactivate_after = reactivate_after
        self._was_braking = False
        self._brake_end_d = None
        self._fired: set[int] = set()

    def __call__(self, state):
        gas = brake = 0.0
        lever = 0
        for idx, (kind, d0, d1, value) in enumerate(self.windows):
            if d0 <= state.d < d1:
                if kind == "gas":
                    gas = value
                elif kind == "brake":
                    brake = value
                elif kind == "lever" and idx not in self._fired:
                    self._fired.add(idx)
                    lever = int(value)
        reactivate = False
        if brake > 0:
            self._was_braking = True
            self._brake_end_d = None
        elif self._was_braking and self.reactivate_after is not None:
            if self._brake_end_d is None:
                self._brake_end_d = state.d
            if state.d - self._brake_end_d >= self.reactivate_after:
                reactivate = True
                self._was_braking = False
                self._brake_end_d = None
        return DriverInputs(gas=gas, brake=brake, lever_presses=lever, reactivate=reactivate)


@pytest.fixture(scope="session")
def demo():
    return demo_route()


@pytest.fixture(scope="session")
def planner_params():
    return PlannerParams()

@pytest.fixture(scope="session")
def spaa_params():
    return StretchParams()


@pytest.fixture(scope="session")
def demo_base(demo, planner_params):
    return plan_base_profile(demo, planner_params)


@pytest.fixture(scope="session")
def two_drop_route():
    # Two successive speed limit decreases on a flat road.
    return make_route(
        [(0, 100), (800, 80), (1400, 60)], 2000, name="two-drop"
    )


TWO_DROP_PRESSES = [
    ("gas", 700, 760, 0.35),
    ("gas", 800, 850, 0.35),
    ("gas", 1330, 1380, 0.35),
    ("gas", 1420, 1460, 0.35),
]


@pytest.fixture(scope="session")
def two_drop_lap(two_drop_route, planner_params):
    profile = plan_base_profile(two_drop_route, planner_params)
    log = run_lap(
        two_drop_route,
        profile,
        DistanceWindowSource(TWO_DROP_PRESSES),
        SimConfig(params=planner_params),
        profile_id="two-drop-base",
    )
    assert log.complete
    return profile, log
