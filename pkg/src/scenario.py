"""
Scripted device timelines and the synthetic user who labels them
"""

import logging
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Tuple, Union

from .context import (
    ATTRIBUTE_NAMES,
    AttributeRow,
    CallDirection,
    CallRecord,
    ContextAssembler,
    LocationReading,
    LocationSource,
    SchedulerEvent,
    TimeWindow,
    Zone,
    format_zone_line,
    parse_zone_line,
    validate_zones,
)
from .errors import ConfigError, CosmosError, UsageError
from .settings import BINS, SETTING_NAMES, SWITCH_SETTINGS, SettingsProfile, Switch, format_profile, parse_profile

logger = logging.getLogger(__name__)

DEMO_START = 1699920000  # midnight UTC
HOUR = 3600
NUMERIC_ATTRIBUTES = frozenset({"call_count", "battery_pct"})
TERM = re.compile(r"^\s*([a-z_]+)\s*(<=|>=|!=|=|<|>)\s*(.+?)\s*$")


@dataclass(frozen=True)
class Tick:
    time: int
    location: LocationReading
    events: Tuple[SchedulerEvent, ...]
    calls: Tuple[CallRecord, ...]
    battery_pct: float
    ground_truth: SettingsProfile


@dataclass(frozen=True)
class ScenarioScript:
    seed: int
    zones: Tuple[Zone, ...]
    ticks: Tuple[Tick, ...]

    def validate(self) -> "ScenarioScript":
        try:
            validate_zones(self.zones)
        except ConfigError as e:
            raise UsageError(str(e)) from e
        for previous, tick in zip(self.ticks, self.ticks[1:]):
            if tick.time <= previous.time:
                raise UsageError(f"tick times must increase: {tick.time} follows {previous.time}")
        for tick in self.ticks:
            if tick.ground_truth is None:
                raise UsageError(f"tick {tick.time} has no ground truth")
        return self


@dataclass(frozen=True)
class Condition:
    attribute: str
    op: str
    value: str

    def matches(self, row: AttributeRow) -> bool:
        actual = getattr(row, self.attribute)
        if self.attribute in NUMERIC_ATTRIBUTES:
            target = float(self.value)
            return {
                "=": actual == target,
                "!=": actual != target,
                "<=": actual <= target,
                "<": actual < target,
                ">=": actual >= target,
                ">": actual > target,
            }[self.op]
        return (actual == self.value) if self.op == "=" else (actual != self.value)

    def __str__(self) -> str:
        return f"{self.attribute}{self.op}{self.value}"


@dataclass(frozen=True)
class UserRule:
    conditions: Tuple[Condition, ...]
    profile: SettingsProfile

    def matches(self, row: AttributeRow) -> bool:
        return all(condition.matches(row) for condition in self.conditions)


@dataclass(frozen=True)
class UserModel:
    """First matching rule wins; noise flips each setting independently"""

    rules: Tuple[UserRule, ...] = ()
    noise_rate: float = 0.0
    default_profile: SettingsProfile = field(
        default_factory=lambda: SettingsProfile(Switch.OFF, Switch.OFF, Switch.ON, 50, 50, Switch.ON)
    )

    def __post_init__(self):
        if not 0 <= self.noise_rate < 1:
            raise UsageError(f"noise_rate must be in [0, 1), got {self.noise_rate}")

    def preferred(self, row: AttributeRow) -> SettingsProfile:
        for rule in self.rules:
            if rule.matches(row):
                return rule.profile
        return self.default_profile

    def observe(self, row: AttributeRow, rng: random.Random) -> SettingsProfile:
        """The profile the user actually sets, noise included."""
        profile = self.preferred(row)
        labels = {}
        for name in SETTING_NAMES:
            value = getattr(profile, name)
            if rng.random() < self.noise_rate:
                if name in SWITCH_SETTINGS:
                    value = Switch.OFF if value is Switch.ON else Switch.ON
                else:
                    value = rng.choice([b for b in BINS if b != value])
            labels[name] = value
        return SettingsProfile(**labels)

    def with_noise(self, noise_rate: float) -> "UserModel":
        return UserModel(self.rules, noise_rate, self.default_profile)


def parse_condition(text: str) -> Condition:
    match = TERM.match(text)
    if not match:
        raise ConfigError(f"bad condition {text!r}")
    attribute, op, value = match.groups()
    if attribute not in ATTRIBUTE_NAMES:
        raise ConfigError(f"unknown attribute {attribute!r} in {text!r}")
    if attribute in NUMERIC_ATTRIBUTES:
        try:
            float(value)
        except ValueError as e:
            raise ConfigError(f"{attribute} compares against numbers, got {value!r}") from e
    elif op not in ("=", "!="):
        raise ConfigError(f"{attribute} is categorical; only = and != apply")
    return Condition(attribute, op, value)


def parse_user(lines: Iterable[str]) -> UserModel:
    rules: List[UserRule] = []
    noise = 0.0
    default = None
    for number, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        kind, _, rest = line.partition(";")
        try:
            if kind == "noise":
                noise = float(rest)
            elif kind == "default":
                default = parse_profile(rest)
            elif kind == "rule":
                predicate, _, profile = rest.rpartition(";")
                terms = () if predicate.strip() == "*" else tuple(
                    parse_condition(term) for term in predicate.split("&")
                )
                rules.append(UserRule(terms, parse_profile(profile)))
            else:
                raise ConfigError(f"unknown entry {kind!r}")
        except (ConfigError, ValueError) as e:
            raise ConfigError(f"user model line {number}: {e}") from e
    try:
        if default is None:
            return UserModel(tuple(rules), noise)
        return UserModel(tuple(rules), noise, default)
    except UsageError as e:
        raise ConfigError(str(e)) from e


def format_user(user: UserModel) -> str:
    lines = [f"noise;{user.noise_rate!r}", f"default;{format_profile(user.default_profile)}"]
    for rule in user.rules:
        predicate = "&".join(str(c) for c in rule.conditions) or "*"
        lines.append(f"rule;{predicate};{format_profile(rule.profile)}")
    return "\n".join(lines) + "\n"


def load_user(path: Union[str, Path]) -> UserModel:
    with open(path, "r", encoding="utf-8") as f:
        return parse_user(f)


def _parse_epoch(text: str) -> int:
    try:
        value = int(text)
    except ValueError as e:
        raise ConfigError(f"bad epoch {text!r}") from e
    if value < 0:
        raise ConfigError(f"negative epoch {text!r}")
    return value


def _parse_location(text: str, at: int) -> LocationReading:
    if text.startswith("wifi:"):
        return LocationReading.wifi(text[5:], at)
    parts = text.split(",")
    if len(parts) not in (2, 3):
        raise ConfigError(f"bad location {text!r}")
    accuracy = float(parts[2]) if len(parts) == 3 else 0.0
    return LocationReading.gps(float(parts[0]), float(parts[1]), at, accuracy)


def _split_list(text: str) -> List[str]:
    text = text.strip()
    if text in ("", "-"):
        return []
    return [part.strip() for part in text.split(",")]


def _parse_events(text: str) -> Tuple[SchedulerEvent, ...]:
    events = []
    for item in _split_list(text):
        category, sep, epoch = item.partition("@")
        if not sep:
            raise ConfigError(f"event {item!r} needs cat@epoch")
        events.append(SchedulerEvent(category, _parse_epoch(epoch)))
    return tuple(events)


DIRECTIONS = {"IN": CallDirection.INCOMING, "OUT": CallDirection.OUTGOING,
              "INCOMING": CallDirection.INCOMING, "OUTGOING": CallDirection.OUTGOING}


def _parse_calls(text: str) -> Tuple[CallRecord, ...]:
    parts = _split_list(text)
    if len(parts) % 2:
        raise ConfigError(f"calls come as dir,cat@epoch pairs: {text!r}")
    calls = []
    for direction, item in zip(parts[::2], parts[1::2]):
        if direction.upper() not in DIRECTIONS:
            raise ConfigError(f"unknown call direction {direction!r}")
        category, sep, epoch = item.partition("@")
        if not sep:
            raise ConfigError(f"call {item!r} needs cat@epoch")
        calls.append(CallRecord(DIRECTIONS[direction.upper()], category, _parse_epoch(epoch)))
    return tuple(calls)


def parse_tick(line: str) -> Tick:
    fields = line.split(";")
    if len(fields) != 7 or fields[0] != "tick":
        raise ConfigError(f"a tick line has 7 ';'-separated fields: {line!r}")
    at = _parse_epoch(fields[1])
    try:
        battery = float(fields[5])
    except ValueError as e:
        raise ConfigError(f"bad battery level {fields[5]!r}") from e
    return Tick(
        time=at,
        location=_parse_location(fields[2].strip(), at),
        events=_parse_events(fields[3]),
        calls=_parse_calls(fields[4]),
        battery_pct=battery,
        ground_truth=parse_profile(fields[6]),
    )


def parse_scenario(lines: Iterable[str], seed: Optional[int] = None) -> ScenarioScript:
    zones: List[Zone] = []
    ticks: List[Tick] = []
    file_seed = 0
    for number, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        kind, _, rest = line.partition(";")
        try:
            if kind == "seed":
                file_seed = int(rest)
            elif kind == "zone":
                zones.append(parse_zone_line(rest))
            elif kind == "tick":
                ticks.append(parse_tick(line))
            else:
                raise ConfigError(f"unknown entry {kind!r}")
        except (CosmosError, ValueError) as e:
            raise ConfigError(f"scenario line {number}: {e}") from e
    script = ScenarioScript(seed if seed is not None else file_seed, tuple(zones), tuple(ticks))
    try:
        return script.validate()
    except UsageError as e:
        raise ConfigError(str(e)) from e


def load_scenario(path: Union[str, Path], seed: Optional[int] = None) -> ScenarioScript:
    with open(path, "r", encoding="utf-8") as f:
        script = parse_scenario(f, seed)
    logger.info("Loaded scenario %s: %d ticks, %d zones", path, len(script.ticks), len(script.zones))
    return script


def _format_location(reading: LocationReading) -> str:
    if reading.source is LocationSource.WIFI:
        return f"wifi:{reading.access_point_id}"
    text = f"{reading.latitude!r},{reading.longitude!r}"
    return text + (f",{reading.accuracy_m!r}" if reading.accuracy_m else "")


def format_tick(tick: Tick) -> str:
    events = ",".join(f"{e.category}@{e.start}" for e in tick.events)
    calls = ",".join(
        f"{'IN' if c.direction is CallDirection.INCOMING else 'OUT'},{c.contact_category}@{c.at}" for c in tick.calls
    )
    return ";".join([
        "tick", str(tick.time), _format_location(tick.location), events, calls,
        repr(float(tick.battery_pct)), format_profile(tick.ground_truth),
    ])


def format_scenario(script: ScenarioScript) -> str:
    lines = [f"seed;{script.seed}"]
    lines += [f"zone;{format_zone_line(zone)}" for zone in script.zones]
    lines += [format_tick(tick) for tick in script.ticks]
    return "\n".join(lines) + "\n"


def demo_zones() -> Tuple[Zone, ...]:
    return (
        Zone("gym", 12.95, 77.60, 100.0),
        Zone("home", 12.9716, 77.5946, 120.0, frozenset({"home-ap"})),
        Zone("office", 12.9352, 77.6245, 200.0, frozenset({"corp-ap-1", "corp-ap-2"})),
    )


# on the road: outside every demo zone
COMMUTE_POINT = (12.96, 77.61)


def demo_user(noise_rate: float = 0.0) -> UserModel:
    """Silent in meetings, loud at home with family, radios on for the gym and the road."""
    p = parse_profile
    rules = (
        UserRule((Condition("battery_pct", "<=", "15"),), p("OFF,OFF,OFF,25,50,ON")),
        UserRule((Condition("event_category", "=", "MEETING"),), p("OFF,OFF,ON,50,0,ON")),
        UserRule((Condition("zone_id", "=", "gym"),), p("ON,ON,OFF,75,100,ON")),
        UserRule((Condition("zone_id", "=", "office"),), p("OFF,OFF,ON,50,50,ON")),
        UserRule((Condition("zone_id", "=", "home"), Condition("last_call_category", "=", "FAMILY")),
                 p("OFF,OFF,ON,75,100,OFF")),
        UserRule((Condition("zone_id", "=", "home"),), p("OFF,OFF,ON,25,75,OFF")),
        UserRule((Condition("zone_id", "=", "UNKNOWN"),), p("ON,ON,OFF,100,100,ON")),
    )
    return UserModel(rules, noise_rate, p("OFF,OFF,ON,50,50,ON"))


def _hour_plan(hour: int) -> Tuple[str, Optional[str], Optional[str]]:
    """(place, event category, caller category) for an hour of the scripted day."""
    if hour < 8 or hour >= 21:
        return "home", None, None
    if hour in (8, 17):
        return "road", None, None
    if hour in (9, 13):
        return "office", "MEETING", None
    if hour in (10, 15):
        return "office", None, "WORK"
    if hour == 18:
        return "gym", "GYM", None
    if hour == 20:
        return "home", None, "FAMILY"
    if hour == 19:
        return "home", None, None
    return "office", None, None


def generate_scenario(
    seed: int,
    ticks: int,
    user: Optional[UserModel] = None,
    zones: Optional[Tuple[Zone, ...]] = None,
    start: int = DEMO_START,
    drain: bool = False,
    window: TimeWindow = TimeWindow(),
    threshold_pct: float = 15.0,
) -> ScenarioScript:
    """An hourly, day-periodic timeline; ground truth is the user's noise-free choice."""
    if ticks < 1:
        raise UsageError(f"ticks must be at least 1, got {ticks}")
    user = user or demo_user()
    zones = zones or demo_zones()
    by_id = {zone.id: zone for zone in zones}
    rng = random.Random(seed)
    assembler = ContextAssembler(zones, window, threshold_pct)

    script_ticks = []
    for i in range(ticks):
        now = start + i * HOUR
        hour = (now // HOUR) % 24
        place, event, caller = _hour_plan(hour)

        if place == "road" or place not in by_id:
            location = LocationReading.gps(COMMUTE_POINT[0], COMMUTE_POINT[1], now)
        elif place == "office":
            location = LocationReading.wifi("corp-ap-1", now)
        else:
            zone = by_id[place]
            # jitter stays well inside the radius
            location = LocationReading.gps(
                zone.center_lat + rng.uniform(-0.0002, 0.0002),
                zone.center_lon + rng.uniform(-0.0002, 0.0002),
                now,
                accuracy_m=round(rng.uniform(3.0, 15.0), 1),
            )

        day = now - now % (24 * HOUR)
        events = (
            SchedulerEvent("MEETING", day + 9 * HOUR, "standup"),
            SchedulerEvent("MEETING", day + 13 * HOUR, "review"),
            SchedulerEvent("GYM", day + 18 * HOUR, "workout"),
        )
        calls = (CallRecord(CallDirection.INCOMING, caller, now - 600, f"{caller.lower()}-contact", 120),) if caller else ()

        if drain:
            battery = 100.0 if hour < 8 else max(0.0, 100.0 - 6.0 * (hour - 7))
        else:
            battery = 80.0

        _, row = assembler.capture(location, events, calls, battery, now)
        script_ticks.append(Tick(now, location, events, calls, battery, user.preferred(row)))

    return ScenarioScript(seed, tuple(zones), tuple(script_ticks)).validate()
