"""
Append-only store of labeled context observations
"""

import logging
import os
from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple

from .context import ATTRIBUTE_NAMES, AttributeRow
from .dtree import AttributeKind, Column, format_header, format_record, format_value, read_table
from .errors import ConfigError, CosmosError
from .settings import LABEL_DOMAINS, SETTING_NAMES, SettingsProfile

logger = logging.getLogger(__name__)

CAT, NUM = AttributeKind.CATEGORICAL, AttributeKind.CONTINUOUS

STORE_COLUMNS = [
    Column("seq", NUM),
    Column("at", NUM),
    Column("zone_id", CAT),
    Column("event_category", CAT),
    Column("call_count", NUM),
    Column("last_call_category", CAT),
    Column("battery_pct", NUM),
    Column("crisis", CAT, ("NO", "YES")),
]
LABEL_COLUMNS = [Column(name, CAT, LABEL_DOMAINS[name]) for name in SETTING_NAMES]
STORE_HEADER = format_header(STORE_COLUMNS, LABEL_COLUMNS)


@dataclass(frozen=True)
class Observation:
    seq: int
    at: int
    row: AttributeRow
    label: SettingsProfile


class ObservationStore:
    """Observations in arrival order, optionally mirrored to a file"""

    def __init__(self, path: Optional[str] = None):
        self.path = path
        self._observations: List[Observation] = []
        if path and os.path.exists(path) and os.path.getsize(path) > 0:
            self._load()
        elif path:
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                f.write(STORE_HEADER + "\n")

    def __len__(self) -> int:
        return len(self._observations)

    def __iter__(self) -> Iterator[Observation]:
        return iter(tuple(self._observations))

    @property
    def latest_id(self) -> int:
        return self._observations[-1].seq if self._observations else 0

    def snapshot(self) -> Tuple[Observation, ...]:
        return tuple(self._observations)

    def append(self, row: AttributeRow, label: SettingsProfile, at: int) -> int:
        observation = Observation(seq=self.latest_id + 1, at=at, row=row, label=label)
        if self.path:
            fields = [str(observation.seq), str(at)]
            fields += [format_value(float(v) if name == "battery_pct" else v) for name, v in zip(ATTRIBUTE_NAMES, row.values())]
            fields += [label.label(name) for name in SETTING_NAMES]
            with open(self.path, "a", encoding="utf-8", newline="\n") as f:
                f.write(format_record(fields) + "\n")
                f.flush()
        self._observations.append(observation)
        return observation.seq

    def _load(self) -> None:
        with open(self.path, "r", encoding="utf-8") as f:
            attr_columns, label_columns, records = read_table(f)
        if [c.name for c in attr_columns] != [c.name for c in STORE_COLUMNS] or [c.name for c in label_columns] != list(SETTING_NAMES):
            raise ConfigError(f"{self.path} is not an observation store")
        for values, labels in records:
            try:
                seq, at = int(values[0]), int(values[1])
                row = AttributeRow(values[2], values[3], int(values[4]), values[5], values[6], values[7])
                label = SettingsProfile.from_labels(dict(zip(SETTING_NAMES, labels)))
            except (CosmosError, TypeError, ValueError) as e:
                raise ConfigError(f"{self.path}: bad record {values}: {e}") from e
            if seq <= self.latest_id:
                raise ConfigError(f"{self.path}: sequence ids must increase, saw {seq} after {self.latest_id}")
            self._observations.append(Observation(seq, at, row, label))
        logger.info("Recovered %d observations from %s", len(self._observations), self.path)
