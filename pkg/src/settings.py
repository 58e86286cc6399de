"""
The six device settings, their per-setting classifiers and the low-battery override
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, Mapping, Tuple, Union

from .context import AttributeRow, BatteryState, row_values
from .dtree import DecisionTree, classify
from .errors import ConfigError, DomainError, UsageError

logger = logging.getLogger(__name__)


class Switch(str, Enum):
    ON = "ON"
    OFF = "OFF"


BINS = (0, 25, 50, 75, 100)

SETTING_NAMES = ("bluetooth", "gps", "wifi", "brightness", "ring_volume", "vibration")
SWITCH_SETTINGS = frozenset({"bluetooth", "gps", "wifi", "vibration"})
LEVEL_SETTINGS = frozenset({"brightness", "ring_volume"})

SWITCH_DOMAIN = (Switch.OFF.value, Switch.ON.value)
LEVEL_DOMAIN = tuple(str(b) for b in BINS)
LABEL_DOMAINS: Dict[str, Tuple[str, ...]] = {
    name: SWITCH_DOMAIN if name in SWITCH_SETTINGS else LEVEL_DOMAIN for name in SETTING_NAMES
}

# dimmest brightness a crisis leaves on
CRISIS_BRIGHTNESS = 25


@dataclass(frozen=True)
class SettingsProfile:
    """The six device settings a suggestion sets at once"""

    bluetooth: Switch
    gps: Switch
    wifi: Switch
    brightness: int
    ring_volume: int
    vibration: Switch

    def __post_init__(self):
        for name in SWITCH_SETTINGS:
            value = getattr(self, name)
            try:
                object.__setattr__(self, name, Switch(value))
            except ValueError as e:
                raise UsageError(f"{name} must be ON or OFF, got {value!r}") from e
        for name in LEVEL_SETTINGS:
            value = getattr(self, name)
            if isinstance(value, bool) or value not in BINS:
                raise DomainError(f"{name} must be one of {BINS}, got {value!r}")
            object.__setattr__(self, name, int(value))

    def label(self, name: str) -> str:
        """Class label of one setting, as the trees see it"""
        value = getattr(self, name)
        return value.value if isinstance(value, Switch) else str(value)

    def labels(self) -> Dict[str, str]:
        return {name: self.label(name) for name in SETTING_NAMES}

    @classmethod
    def from_labels(cls, labels: Mapping[str, str]) -> "SettingsProfile":
        """Rebuild a profile from one class label per setting"""
        missing = [name for name in SETTING_NAMES if name not in labels]
        if missing:
            raise UsageError(f"missing settings: {missing}")
        values = {}
        for name in SETTING_NAMES:
            raw = labels[name]
            if raw not in LABEL_DOMAINS[name]:
                raise DomainError(f"{name}: {raw!r} is not one of {LABEL_DOMAINS[name]}")
            values[name] = Switch(raw) if name in SWITCH_SETTINGS else int(raw)
        return cls(**values)


SENTINEL_PROFILE = SettingsProfile(Switch.OFF, Switch.OFF, Switch.ON, 50, 50, Switch.ON)


def parse_profile(text: str) -> SettingsProfile:
    """Parse the compact 'B,P,W,Y,R,V' form; switches accept ON/OFF or 1/0."""
    parts = [p.strip().upper() for p in text.split(",")]
    if len(parts) != len(SETTING_NAMES):
        raise ConfigError(f"a profile has six fields, got {text!r}")
    labels = {}
    for name, part in zip(SETTING_NAMES, parts):
        if name in SWITCH_SETTINGS:
            part = {"1": "ON", "0": "OFF"}.get(part, part)
        labels[name] = part
    try:
        return SettingsProfile.from_labels(labels)
    except (DomainError, UsageError) as e:
        raise ConfigError(f"bad profile {text!r}: {e}") from e


def format_profile(profile: SettingsProfile) -> str:
    """Inverse of parse_profile"""
    return ",".join(profile.label(name) for name in SETTING_NAMES)


@dataclass(frozen=True)
class CriticalServicesRepository:
    """Settings the low-battery override must leave alone"""

    protected: FrozenSet[str] = frozenset()

    def __post_init__(self):
        unknown = set(self.protected) - set(SETTING_NAMES)
        if unknown:
            raise ConfigError(f"unknown settings in critical services: {sorted(unknown)}")
        object.__setattr__(self, "protected", frozenset(self.protected))

    def __contains__(self, name: str) -> bool:
        return name in self.protected


DEFAULT_CRITICAL = CriticalServicesRepository(frozenset({"ring_volume", "vibration"}))


def parse_critical(lines: Iterable[str]) -> CriticalServicesRepository:
    """One setting name per line, # starts a comment"""
    names = set()
    for raw in lines:
        line = raw.split("#", 1)[0].strip()
        if line:
            names.add(line)
    return CriticalServicesRepository(frozenset(names))


def load_critical(path: Union[str, Path, None]) -> CriticalServicesRepository:
    """Critical services from a file; no file means ring volume and vibration"""
    if path is None:
        return DEFAULT_CRITICAL
    with open(path, "r", encoding="utf-8") as f:
        repository = parse_critical(f)
    logger.info("Critical services from %s: %s", path, sorted(repository.protected))
    return repository


def decide_profile(trees: Mapping[str, DecisionTree], row: AttributeRow) -> SettingsProfile:
    """One classification per setting."""
    labels = {}
    for name in SETTING_NAMES:
        tree = trees.get(name)
        if tree is None:
            raise UsageError(f"no tree for setting {name}")
        if tree.schema.label_domain != LABEL_DOMAINS[name]:
            raise UsageError(f"tree for {name} predicts {tree.schema.label_domain}, expected {LABEL_DOMAINS[name]}")
        labels[name], _ = classify(tree, row_values(row, tree.schema))
    return SettingsProfile.from_labels(labels)


def apply_battery_override(
    profile: SettingsProfile,
    battery: BatteryState,
    critical: CriticalServicesRepository = DEFAULT_CRITICAL,
) -> SettingsProfile:
    """Switch off radios and dim the screen in a power crisis, sparing critical services."""
    if not battery.crisis:
        return profile
    changes = {}
    for name in ("bluetooth", "wifi", "gps"):
        if name not in critical:
            changes[name] = Switch.OFF
    if "brightness" not in critical:
        changes["brightness"] = min(profile.brightness, CRISIS_BRIGHTNESS)
    return replace(profile, **changes)


def diff_profiles(a: SettingsProfile, b: SettingsProfile) -> Tuple[int, Tuple[str, ...]]:
    """(matching settings, names of the settings that differ)"""
    mismatched = tuple(name for name in SETTING_NAMES if getattr(a, name) != getattr(b, name))
    return len(SETTING_NAMES) - len(mismatched), mismatched
