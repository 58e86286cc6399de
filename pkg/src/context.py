"""
Context assembly: location, schedule, call log and battery into one snapshot
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

from .dtree import MISSING, AttributeSchema, Attribute, AttributeKind
from .errors import ConfigError, DomainError, UsageError

logger = logging.getLogger(__name__)

TimeInstant = int

UNKNOWN_ZONE = "UNKNOWN"
NO_EVENT = "NONE"
NO_CALL = "NONE"
CRISIS_YES = "YES"
CRISIS_NO = "NO"

EARTH_RADIUS_M = 6371000.0

ATTRIBUTE_NAMES = (
    "zone_id",
    "event_category",
    "call_count",
    "last_call_category",
    "battery_pct",
    "crisis",
)


def _check_instant(value: int, what: str) -> None:
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise DomainError(f"{what} must be a non-negative integer epoch, got {value!r}")


def _check_token(value: str, what: str) -> None:
    """Categories are stored as dataset cells, where "?" means missing."""
    if (
        not isinstance(value, str)
        or not value
        or value != value.strip()
        or not value.isprintable()
        or value == MISSING
    ):
        raise UsageError(f"{what} must be a non-empty printable token, got {value!r}")


def _strip_field(obj, name: str) -> None:
    value = getattr(obj, name)
    if isinstance(value, str):
        object.__setattr__(obj, name, value.strip())


@dataclass(frozen=True)
class TimeWindow:
    """Half-width of the capture window, in seconds"""

    kappa_seconds: int = 1800

    def __post_init__(self):
        if isinstance(self.kappa_seconds, bool) or not isinstance(self.kappa_seconds, int) or self.kappa_seconds <= 0:
            raise DomainError(f"kappa_seconds must be a positive integer, got {self.kappa_seconds!r}")


class LocationSource(str, Enum):
    GPS = "GPS"
    WIFI = "WIFI"


@dataclass(frozen=True)
class LocationReading:
    source: LocationSource
    at: TimeInstant
    latitude: Optional[float] = None
    longitude: Optional[float] = None
    access_point_id: Optional[str] = None
    accuracy_m: float = 0.0

    def __post_init__(self):
        _check_instant(self.at, "reading time")
        if self.accuracy_m < 0:
            raise DomainError(f"accuracy_m must be >= 0, got {self.accuracy_m}")
        if self.source is LocationSource.GPS:
            if self.latitude is None or self.longitude is None or self.access_point_id is not None:
                raise UsageError("GPS readings carry latitude/longitude and no access point")
            if not -90 <= self.latitude <= 90:
                raise DomainError(f"latitude out of range: {self.latitude}")
            if not -180 <= self.longitude <= 180:
                raise DomainError(f"longitude out of range: {self.longitude}")
        else:
            if not self.access_point_id or self.latitude is not None or self.longitude is not None:
                raise UsageError("WIFI readings carry an access point id and no coordinates")

    @classmethod
    def gps(cls, latitude: float, longitude: float, at: TimeInstant, accuracy_m: float = 0.0) -> "LocationReading":
        return cls(LocationSource.GPS, at, latitude=latitude, longitude=longitude, accuracy_m=accuracy_m)

    @classmethod
    def wifi(cls, access_point_id: str, at: TimeInstant, accuracy_m: float = 0.0) -> "LocationReading":
        return cls(LocationSource.WIFI, at, access_point_id=access_point_id, accuracy_m=accuracy_m)


@dataclass(frozen=True)
class Zone:
    id: str
    center_lat: float
    center_lon: float
    radius_m: float
    wifi_ids: FrozenSet[str] = frozenset()

    def __post_init__(self):
        _check_token(self.id, "zone id")
        if self.radius_m <= 0:
            raise DomainError(f"zone {self.id}: radius_m must be positive, got {self.radius_m}")
        if not -90 <= self.center_lat <= 90 or not -180 <= self.center_lon <= 180:
            raise DomainError(f"zone {self.id}: center out of range")


@dataclass(frozen=True)
class SchedulerEvent:
    category: str
    start: TimeInstant
    title: str = ""

    def __post_init__(self):
        _strip_field(self, "category")
        _check_token(self.category, "event category")
        _check_instant(self.start, "event start")


class CallDirection(str, Enum):
    INCOMING = "INCOMING"
    OUTGOING = "OUTGOING"


@dataclass(frozen=True)
class CallRecord:
    direction: CallDirection
    contact_category: str
    at: TimeInstant
    contact_id: str = ""
    duration_s: int = 0

    def __post_init__(self):
        # empty means an unknown caller
        _strip_field(self, "contact_category")
        if self.contact_category:
            _check_token(self.contact_category, "contact category")
        _check_instant(self.at, "call time")
        if self.duration_s < 0:
            raise DomainError(f"duration_s must be >= 0, got {self.duration_s}")


@dataclass(frozen=True)
class BatteryState:
    level_pct: float
    threshold_pct: float
    crisis: bool


@dataclass(frozen=True)
class ContextVector:
    location: LocationReading
    events: Tuple[SchedulerEvent, ...]
    calls: Tuple[CallRecord, ...]
    battery: BatteryState
    captured_at: TimeInstant


@dataclass(frozen=True)
class AttributeRow:
    """The featurized context sent to the server"""

    zone_id: str
    event_category: str
    call_count: int
    last_call_category: str
    battery_pct: float
    crisis: str

    def __post_init__(self):
        if self.crisis not in (CRISIS_YES, CRISIS_NO):
            raise UsageError(f"crisis must be YES or NO, got {self.crisis!r}")
        if isinstance(self.call_count, bool) or not isinstance(self.call_count, int) or self.call_count < 0:
            raise DomainError(f"call_count must be >= 0, got {self.call_count}")
        if not math.isfinite(self.battery_pct) or not 0 <= self.battery_pct <= 100:
            raise DomainError(f"battery_pct must be in [0, 100], got {self.battery_pct}")
        for name in ("zone_id", "event_category", "last_call_category"):
            _check_token(getattr(self, name), name)

    def values(self) -> Tuple:
        return tuple(getattr(self, name) for name in ATTRIBUTE_NAMES)


def window_events(all_events: Sequence[SchedulerEvent], now: TimeInstant, window: TimeWindow) -> List[SchedulerEvent]:
    """Events starting within kappa of now, on either side."""
    low, high = now - window.kappa_seconds, now + window.kappa_seconds
    return [event for event in all_events if low <= event.start <= high]


def window_calls(all_calls: Sequence[CallRecord], now: TimeInstant, window: TimeWindow) -> List[CallRecord]:
    """Calls from the last kappa seconds. Future-dated log entries are dropped."""
    low = now - window.kappa_seconds
    return [call for call in all_calls if low <= call.at <= now]


def assess_battery(level_pct: float, threshold_pct: float) -> BatteryState:
    """Battery state; crisis at or below the threshold."""
    for name, value in (("level_pct", level_pct), ("threshold_pct", threshold_pct)):
        if not math.isfinite(value) or not 0 <= value <= 100:
            raise DomainError(f"{name} must be in [0, 100], got {value}")
    return BatteryState(level_pct=level_pct, threshold_pct=threshold_pct, crisis=level_pct <= threshold_pct)


def planar_distance_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Equirectangular approximation; fine for zones a few km across."""
    mean_lat = math.radians((lat1 + lat2) / 2.0)
    dx = math.radians(lon2 - lon1) * math.cos(mean_lat)
    dy = math.radians(lat2 - lat1)
    return EARTH_RADIUS_M * math.hypot(dx, dy)


def resolve_zone(reading: LocationReading, zones: Iterable[Zone]) -> str:
    """
    Zone id for a reading, or UNKNOWN.

    GPS readings take the nearest center among zones whose radius covers the
    point. Wi-Fi readings match the access point id. Ties go to the smaller
    id, so table order never matters.
    """
    if reading.source is LocationSource.WIFI:
        matches = sorted(zone.id for zone in zones if reading.access_point_id in zone.wifi_ids)
        return matches[0] if matches else UNKNOWN_ZONE

    best = None
    for zone in zones:
        distance = planar_distance_m(reading.latitude, reading.longitude, zone.center_lat, zone.center_lon)
        if distance <= zone.radius_m:
            key = (distance, zone.id)
            if best is None or key < best:
                best = key
    return best[1] if best else UNKNOWN_ZONE


def assemble_context(
    location: LocationReading,
    all_events: Sequence[SchedulerEvent],
    all_calls: Sequence[CallRecord],
    battery_level_pct: float,
    threshold_pct: float,
    now: TimeInstant,
    window: TimeWindow,
) -> ContextVector:
    """Windowed snapshot of every factor at `now`."""
    _check_instant(now, "capture time")
    return ContextVector(
        location=location,
        events=tuple(window_events(all_events, now, window)),
        calls=tuple(window_calls(all_calls, now, window)),
        battery=assess_battery(battery_level_pct, threshold_pct),
        captured_at=now,
    )


def featurize(ctx: ContextVector, zones: Iterable[Zone]) -> AttributeRow:
    """
    Reduce a snapshot to the six classifier attributes.

    The earliest event and the most recent call stand for their windows;
    an empty window becomes NONE.
    """
    event_category = NO_EVENT
    if ctx.events:
        # earliest start wins, input order breaks ties
        _, _, first = min((event.start, i, event) for i, event in enumerate(ctx.events))
        event_category = first.category

    last_call_category = NO_CALL
    if ctx.calls:
        _, _, last = max((call.at, i, call) for i, call in enumerate(ctx.calls))
        last_call_category = last.contact_category or NO_CALL

    return AttributeRow(
        zone_id=resolve_zone(ctx.location, zones),
        event_category=event_category,
        call_count=len(ctx.calls),
        last_call_category=last_call_category,
        battery_pct=float(ctx.battery.level_pct),
        crisis=CRISIS_YES if ctx.battery.crisis else CRISIS_NO,
    )


@dataclass(frozen=True)
class ContextAssembler:
    """Bundles the zone table and thresholds a client captures with."""

    zones: Tuple[Zone, ...] = ()
    window: TimeWindow = field(default_factory=TimeWindow)
    threshold_pct: float = 15.0

    def capture(
        self,
        location: LocationReading,
        all_events: Sequence[SchedulerEvent],
        all_calls: Sequence[CallRecord],
        battery_level_pct: float,
        now: TimeInstant,
    ) -> Tuple[ContextVector, AttributeRow]:
        ctx = assemble_context(location, all_events, all_calls, battery_level_pct, self.threshold_pct, now, self.window)
        return ctx, featurize(ctx, self.zones)


def attribute_schema(
    rows: Iterable[AttributeRow], label_domain: Sequence[str], zones: Iterable[Zone] = ()
) -> AttributeSchema:
    """Schema over the six context attributes; value sets are what was observed plus sentinels."""
    zone_ids = {UNKNOWN_ZONE} | {zone.id for zone in zones}
    events = {NO_EVENT}
    callers = {NO_CALL}
    for row in rows:
        zone_ids.add(row.zone_id)
        events.add(row.event_category)
        callers.add(row.last_call_category)
    return AttributeSchema(
        attributes=(
            Attribute("zone_id", AttributeKind.CATEGORICAL, tuple(sorted(zone_ids))),
            Attribute("event_category", AttributeKind.CATEGORICAL, tuple(sorted(events))),
            Attribute("call_count", AttributeKind.CONTINUOUS),
            Attribute("last_call_category", AttributeKind.CATEGORICAL, tuple(sorted(callers))),
            Attribute("battery_pct", AttributeKind.CONTINUOUS),
            Attribute("crisis", AttributeKind.CATEGORICAL, (CRISIS_NO, CRISIS_YES)),
        ),
        label_domain=tuple(label_domain),
    )


def row_values(row: AttributeRow, schema: AttributeSchema) -> Tuple:
    """Attribute tuple for the classifier; categories the schema never saw become missing."""
    values = []
    for attribute, value in zip(schema.attributes, row.values()):
        if attribute.kind is AttributeKind.CATEGORICAL:
            values.append(value if value in attribute.values else None)
        else:
            values.append(float(value))
    return tuple(values)


def parse_zone_line(line: str) -> Zone:
    parts = [part.strip() for part in line.split(",")]
    if len(parts) not in (4, 5):
        raise ConfigError(f"zone line needs 4 or 5 fields: {line!r}")
    try:
        lat, lon, radius = float(parts[1]), float(parts[2]), float(parts[3])
    except ValueError as e:
        raise ConfigError(f"bad number in zone line {line!r}") from e
    wifi = frozenset(ap.strip() for ap in parts[4].split(";") if ap.strip()) if len(parts) == 5 else frozenset()
    try:
        return Zone(parts[0], lat, lon, radius, wifi)
    except (DomainError, UsageError) as e:
        raise ConfigError(str(e)) from e


def format_zone_line(zone: Zone) -> str:
    line = f"{zone.id},{zone.center_lat!r},{zone.center_lon!r},{zone.radius_m!r}"
    if zone.wifi_ids:
        line += "," + ";".join(sorted(zone.wifi_ids))
    return line


def validate_zones(zones: Sequence[Zone]) -> Tuple[Zone, ...]:
    seen = set()
    for zone in zones:
        if zone.id in seen:
            raise ConfigError(f"duplicate zone id: {zone.id}")
        if zone.id == UNKNOWN_ZONE:
            raise ConfigError(f"zone id {UNKNOWN_ZONE} is reserved")
        seen.add(zone.id)
    return tuple(zones)


def parse_zones(lines: Iterable[str]) -> Tuple[Zone, ...]:
    zones = []
    for raw in lines:
        line = raw.split("#", 1)[0].strip()
        if line:
            zones.append(parse_zone_line(line))
    return validate_zones(zones)


def load_zones(path: Union[str, Path]) -> Tuple[Zone, ...]:
    with open(path, "r", encoding="utf-8") as f:
        zones = parse_zones(f)
    logger.info("Loaded %d zones from %s", len(zones), path)
    return zones
