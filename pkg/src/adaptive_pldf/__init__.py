"""Testbed for iterative personalization of a predictive longitudinal driving
function: route model, baseline planner, lap simulator with driver
interventions, the speed profile adjustment algorithm, synthetic drivers,
metrics, a batch experiment CLI, and a live session service."""

from .drive_sim import DriveLog, DriverInputs, LapRunner, SimConfig, SimState, run_lap
from .driver_model import PreferenceProfile, SyntheticDriver, make_preference
from .metrics import InterventionRates, intervention_rates, profile_rmse
from .pldf_planner import (
    PlannerParams,
    SetSpeedOffsetEntry,
    SetSpeedOffsetMap,
    SpeedProfile,
    apply_set_speed_offsets,
    curve_speed_limit,
    plan_base_profile,
)
from .route_map import RouteMap, curvature_at, demo_route, legal_speed, load_route
from .spaa_core import (
    IterationState,
    StretchParams,
    apply_iteration,
    blend,
    build_prepro_profile,
    initial_state,
)

__all__ = [
    "DriveLog",
    "DriverInputs",
    "InterventionRates",
    "IterationState",
    "LapRunner",
    "PlannerParams",
    "PreferenceProfile",
    "RouteMap",
    "SetSpeedOffsetEntry",
    "SetSpeedOffsetMap",
    "SimConfig",
    "SimState",
    "SpeedProfile",
    "StretchParams",
    "SyntheticDriver",
    "apply_iteration",
    "apply_set_speed_offsets",
    "blend",
    "build_prepro_profile",
    "curvature_at",
    "curve_speed_limit",
    "demo_route",
    "initial_state",
    "intervention_rates",
    "legal_speed",
    "load_route",
    "make_preference",
    "plan_base_profile",
    "profile_rmse",
    "run_lap",
]

__version__ = "0.1.0"
