"""Distance-parameterized routes: legal speed limit zones and road curvature.

A route is a 1-D map over driven distance. Speed limits are stored as an
ordered tiling of half-open zones so a limit sign takes effect exactly at its
position; curvature is a piecewise-linear function of distance. All values are
kept in SI units (m, m/s); km/h appears only in the file format and is
converted by 1/3.6 on load.
"""

from __future__ import annotations

import json
from bisect import bisect_right
from dataclasses import dataclass, field
from importlib import resources

KMH_TO_MPS = 1.0 / 3.6
MPS_TO_KMH = 3.6

# Hard ceiling for any speed value on a route (m/s); doubles as the
# "unconstrained" sentinel where no curve limit applies.
MAX_SPEED_MPS = 70.0


class RouteError(ValueError):
    """Malformed or inconsistent route data."""


@dataclass(frozen=True)
class SpeedLimitZone:
    start: float  # m
    limit: float  # m/s

    def __post_init__(self):
        if self.start < 0:
            raise RouteError(f"zone start {self.start} must be >= 0")
        if not 0 < self.limit <= MAX_SPEED_MPS:
            raise RouteError(
                f"zone limit {self.limit} m/s outside (0, {MAX_SPEED_MPS}]"
            )


@dataclass(frozen=True)
class CurvatureSample:
    distance: float  # m
    curvature: float  # 1/m, unsigned magnitude

    def __post_init__(self):
        if self.curvature < 0:
            raise RouteError(f"curvature {self.curvature} must be >= 0")


@dataclass(frozen=True)
class RouteMap:
    """Immutable after load; safe to share across threads."""

    length: float
    limit_zones: tuple[SpeedLimitZone, ...]
    curvature: tuple[CurvatureSample, ...]
    name: str = ""
    _zone_starts: tuple[float, ...] = field(init=False, repr=False, compare=False)
    _curv_dists: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.length <= 0:
            raise RouteError(f"route length {self.length} must be > 0")
        if not self.limit_zones:
            raise RouteError("route needs at least one speed limit zone")
        if self.limit_zones[0].start != 0:
            raise RouteError(
                f"first zone starts at {self.limit_zones[0].start}, must start at 0"
            )
        starts = [z.start for z in self.limit_zones]
        for i in range(1, len(starts)):
            if starts[i] <= starts[i - 1]:
                raise RouteError(
                    f"non-monotone zone start: zone {i} starts at {starts[i]} "
                    f"after zone {i - 1} at {starts[i - 1]}"
                )
        if starts[-1] >= self.length:
            raise RouteError(
                f"zone {len(starts) - 1} starts at {starts[-1]}, "
                f"beyond route length {self.length}"
            )
        if not self.curvature:
            raise RouteError("route needs at least one curvature sample")
        if self.curvature[0].distance != 0:
            raise RouteError(
                f"first curvature sample at {self.curvature[0].distance}, must be at 0"
            )
        dists = [c.distance for c in self.curvature]
        for i in range(1, len(dists)):
            if dists[i] <= dists[i - 1]:
                raise RouteError(
                    f"non-monotone curvature distance: sample {i} at {dists[i]} "
                    f"after sample {i - 1} at {dists[i - 1]}"
                )
        object.__setattr__(self, "_zone_starts", tuple(starts))
        object.__setattr__(self, "_curv_dists", tuple(dists))

    def zone_index(self, d: float) -> int:
        """Index of the zone containing d; zones are half-open [start, next)."""
        if not 0 <= d < self.length:
            raise RouteError(f"distance {d} outside [0, {self.length})")
        return bisect_right(self._zone_starts, d) - 1

    def zone_span(self, index: int) -> tuple[float, float]:
        """[start, end) span of a zone; the last zone ends at route length."""
        start = self.limit_zones[index].start
        if index + 1 < len(self.limit_zones):
            return start, self.limit_zones[index + 1].start
        return start, self.length


def legal_speed(route: RouteMap, d: float) -> float:
    """Legal limit at distance d; a boundary d belongs to the zone starting there."""
    return route.limit_zones[route.zone_index(d)].limit


def curvature_at(route: RouteMap, d: float) -> float:
    """Curvature at d, linearly interpolated; clamped to the last sample beyond it."""
    if not 0 <= d <= route.length:
        raise RouteError(f"distance {d} outside [0, {route.length}]")
    dists = route._curv_dists
    i = bisect_right(dists, d)
    if i >= len(dists):
        return route.curvature[-1].curvature
    if i == 0:  # d == 0 exactly, first sample required at 0
        return route.curvature[0].curvature
    a, b = route.curvature[i - 1], route.curvature[i]
    t = (d - a.distance) / (b.distance - a.distance)
    return (1.0 - t) * a.curvature + t * b.curvature


def load_route(source: str | bytes) -> RouteMap:
    """Parse and validate a JSON route file (see serialize_route for the schema)."""
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise RouteError(f"route file is not valid JSON: {exc}") from exc
    try:
        zones = tuple(
            SpeedLimitZone(start=float(z["start_m"]), limit=float(z["limit_kmh"]) * KMH_TO_MPS)
            for z in doc["limit_zones"]
        )
        curvature = tuple(
            CurvatureSample(distance=float(c["d_m"]), curvature=float(c["kappa_inv_m"]))
            for c in doc["curvature"]
        )
        return RouteMap(
            length=float(doc["length_m"]),
            limit_zones=zones,
            curvature=curvature,
            name=str(doc.get("name", "")),
        )
    except (KeyError, TypeError) as exc:
        raise RouteError(f"route file missing or malformed field: {exc}") from exc


def load_route_file(path) -> RouteMap:
    with open(path, encoding="utf-8") as f:
        return load_route(f.read())


def serialize_route(route: RouteMap) -> str:
    doc = {
        "name": route.name,
        "length_m": route.length,
        "limit_zones": [
            {"start_m": z.start, "limit_kmh": z.limit * MPS_TO_KMH}
            for z in route.limit_zones
        ],
        "curvature": [
            {"d_m": c.distance, "kappa_inv_m": c.curvature} for c in route.curvature
        ],
    }
    return json.dumps(doc, indent=2)


def demo_route() -> RouteMap:
    """The bundled 4.5 km rural demo route."""
    data = resources.files("adaptive_pldf.data").joinpath("demo_route.json")
    return load_route(data.read_text(encoding="utf-8"))
