"""
Battery drain model for comparing settings timelines
"""

from dataclasses import dataclass, fields
from typing import Iterable, List, Sequence, Tuple

from .errors import DomainError
from .settings import SettingsProfile, Switch

DEFAULT_CAPACITY_MAH = 1500.0

Timeline = Sequence[Tuple[SettingsProfile, float]]


@dataclass(frozen=True)
class DrainModel:
    """Current draw in mA; levels scale their coefficient by bin/100"""

    base_ma: float = 8.0
    bluetooth_ma: float = 4.0
    gps_ma: float = 25.0
    wifi_ma: float = 12.0
    brightness_ma: float = 30.0
    ring_volume_ma: float = 0.0
    vibration_ma: float = 0.0

    def __post_init__(self):
        if self.base_ma <= 0:
            raise DomainError(f"base drain must be positive, got {self.base_ma}")
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise DomainError(f"{f.name} must be >= 0, got {getattr(self, f.name)}")

    def drain_ma(self, profile: SettingsProfile) -> float:
        """Total draw while the profile is applied"""
        total = self.base_ma
        total += self.bluetooth_ma if profile.bluetooth is Switch.ON else 0.0
        total += self.gps_ma if profile.gps is Switch.ON else 0.0
        total += self.wifi_ma if profile.wifi is Switch.ON else 0.0
        total += self.vibration_ma if profile.vibration is Switch.ON else 0.0
        total += self.brightness_ma * profile.brightness / 100.0
        total += self.ring_volume_ma * profile.ring_volume / 100.0
        return total


def _check_timeline(timeline: Iterable[Tuple[SettingsProfile, float]]) -> List[Tuple[SettingsProfile, float]]:
    """Materialize the timeline; durations must be non-negative."""
    segments = list(timeline)
    for _, hours in segments:
        if hours < 0:
            raise DomainError(f"segment durations must be >= 0, got {hours}")
    return segments


def _run(segments, model: DrainModel, remaining_mah: float) -> Tuple[float, float]:
    """(hours elapsed, mAh left) after one pass; stops early when the battery empties."""
    elapsed = 0.0
    for profile, hours in segments:
        drain = model.drain_ma(profile)
        if drain * hours >= remaining_mah:
            return elapsed + remaining_mah / drain, 0.0
        remaining_mah -= drain * hours
        elapsed += hours
    return elapsed, remaining_mah


def simulate_battery_hours(
    timeline: Timeline,
    capacity_mah: float = DEFAULT_CAPACITY_MAH,
    model: DrainModel = DrainModel(),
    repeat: bool = False,
) -> float:
    """
    Hours until a full battery empties while following the timeline.

    Without ``repeat`` the result is capped at the timeline's length. With
    ``repeat`` the timeline is replayed until the battery is empty.
    """
    if capacity_mah <= 0:
        raise DomainError(f"capacity must be positive, got {capacity_mah}")
    segments = _check_timeline(timeline)
    elapsed, remaining = _run(segments, model, capacity_mah)
    if remaining == 0.0 or not repeat:
        return elapsed

    period = sum(hours for _, hours in segments)
    if period <= 0:
        raise DomainError("a repeated timeline needs a positive duration")
    per_pass = capacity_mah - remaining
    # skip whole passes, then finish the last one segment by segment
    whole = int(remaining // per_pass)
    if whole and whole * per_pass >= remaining:
        whole -= 1
    remaining -= whole * per_pass
    hours = elapsed + whole * period
    while remaining > 0:
        more, remaining = _run(segments, model, remaining)
        hours += more
    return hours
