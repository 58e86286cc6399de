"""
Evaluation harness: replays scenarios against an in-process server and
aggregates relevance and battery results per session
"""

import csv
import logging
import random
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from rich.table import Table

from .context import ContextAssembler, TimeWindow
from .energy import DEFAULT_CAPACITY_MAH, DrainModel, simulate_battery_hours
from .errors import ConfigError, DomainError, UsageError
from .protocol import ContextUpload, DocumentStatus
from .scenario import ScenarioScript, UserModel
from .server import CosmosServer, Phase, ServerParams
from .settings import DEFAULT_CRITICAL, CriticalServicesRepository, SettingsProfile, diff_profiles, format_profile
from .store import ObservationStore
from .transport import InProcessChannel

logger = logging.getLogger(__name__)

TRIPLE_TOLERANCE = 0.1


class Relevance(str, Enum):
    CR = "CR"
    PR = "PR"
    CIR = "CIR"


def score_relevance(suggested: SettingsProfile, truth: SettingsProfile) -> Relevance:
    matches, _ = diff_profiles(suggested, truth)
    if matches == 6:
        return Relevance.CR
    if matches >= 4:
        return Relevance.PR
    return Relevance.CIR


@dataclass(frozen=True)
class RelevanceCounts:
    completely: int = 0
    partially: int = 0
    irrelevant: int = 0

    @property
    def total(self) -> int:
        return self.completely + self.partially + self.irrelevant

    def add(self, relevance: Relevance) -> "RelevanceCounts":
        if relevance is Relevance.CR:
            return replace(self, completely=self.completely + 1)
        if relevance is Relevance.PR:
            return replace(self, partially=self.partially + 1)
        return replace(self, irrelevant=self.irrelevant + 1)

    def percentages(self) -> Optional[Tuple[float, float, float]]:
        """(crs, prs, cis) in percent, or None when nothing was suggested."""
        if not self.total:
            return None
        return tuple(100.0 * n / self.total for n in (self.completely, self.partially, self.irrelevant))


@dataclass(frozen=True)
class RelevanceReport:
    sessions: Tuple[Tuple[float, float, float], ...]
    mean_crs: float
    mean_prs: float
    mean_cis: float

    @property
    def cumulative_relevant(self) -> float:
        return self.mean_crs + self.mean_prs


EMPTY_RELEVANCE = RelevanceReport((), 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class BatteryReport:
    sessions: Tuple[Tuple[float, float], ...]
    mean_normal: float
    mean_cosmos: float

    @property
    def improvement_pct(self) -> float:
        return 100.0 * (self.mean_cosmos - self.mean_normal) / self.mean_normal


def aggregate_relevance(sessions: Iterable[Sequence[float]]) -> RelevanceReport:
    triples = [tuple(float(v) for v in s) for s in sessions]
    if not triples:
        raise UsageError("no sessions to aggregate")
    for triple in triples:
        if len(triple) != 3:
            raise UsageError(f"a relevance session has three columns, got {triple}")
        if any(not 0 <= v <= 100 for v in triple):
            raise UsageError(f"percentages must be in [0, 100]: {triple}")
        if abs(sum(triple) - 100.0) > TRIPLE_TOLERANCE:
            raise UsageError(f"session {triple} does not sum to 100")
    n = len(triples)
    crs, prs, cis = (sum(t[i] for t in triples) / n for i in range(3))
    return RelevanceReport(tuple(triples), crs, prs, cis)


def aggregate_battery(sessions: Iterable[Sequence[float]]) -> BatteryReport:
    pairs = [tuple(float(v) for v in s) for s in sessions]
    if not pairs:
        raise UsageError("no sessions to aggregate")
    for pair in pairs:
        if len(pair) != 2:
            raise UsageError(f"a battery session has two columns, got {pair}")
        if min(pair) <= 0:
            raise DomainError(f"battery hours must be positive: {pair}")
    n = len(pairs)
    return BatteryReport(tuple(pairs), sum(p[0] for p in pairs) / n, sum(p[1] for p in pairs) / n)


TRACE_HEADER = ("tick", "epoch", "phase", "zone", "event", "crisis", "suggested", "truth", "relevance")


@dataclass(frozen=True)
class TraceRow:
    tick: int
    at: int
    phase: Phase
    zone: str
    event: str
    crisis: str
    suggested: Optional[SettingsProfile]
    truth: SettingsProfile
    relevance: Optional[Relevance]

    def fields(self) -> List[str]:
        return [
            str(self.tick),
            str(self.at),
            self.phase.value,
            self.zone,
            self.event,
            self.crisis,
            format_profile(self.suggested) if self.suggested is not None else "",
            format_profile(self.truth),
            self.relevance.value if self.relevance is not None else "",
        ]


@dataclass(frozen=True)
class ScenarioRun:
    counts: RelevanceCounts
    report: RelevanceReport
    trace: Tuple[TraceRow, ...]
    normal_hours: float
    cosmos_hours: float
    final_phase: Phase


def _timelines(trace: Sequence[TraceRow]) -> Tuple[list, list]:
    """User-chosen and COSMOS-applied profiles, each held until the next tick."""
    normal, cosmos = [], []
    for i, row in enumerate(trace):
        if i + 1 < len(trace):
            hours = (trace[i + 1].at - row.at) / 3600.0
        elif i:
            hours = (row.at - trace[i - 1].at) / 3600.0
        else:
            hours = 1.0
        normal.append((row.truth, hours))
        cosmos.append((row.suggested if row.suggested is not None else row.truth, hours))
    return normal, cosmos


def run_scenario(
    script: ScenarioScript,
    user: Optional[UserModel] = None,
    params: ServerParams = ServerParams(),
    window: TimeWindow = TimeWindow(),
    critical: CriticalServicesRepository = DEFAULT_CRITICAL,
    drain: DrainModel = DrainModel(),
    capacity_mah: float = DEFAULT_CAPACITY_MAH,
    sms: bool = False,
    client_id: str = "sim",
) -> ScenarioRun:
    """
    Drive a fresh server tick by tick.

    Each tick's context is captured, sent with the profile the user set and
    the reply is scored against that same profile. Without a user model the
    script's ground truth is what the user sets. Only replies carrying
    trained suggestions are scored.
    """
    if not script.ticks:
        raise UsageError("scenario has no ticks")
    script.validate()

    rng = random.Random(script.seed)
    server = CosmosServer(params, ObservationStore(), critical)
    channel = InProcessChannel(server)
    assembler = ContextAssembler(script.zones, window, params.battery_threshold)

    counts = RelevanceCounts()
    trace = []
    for i, tick in enumerate(script.ticks):
        _, row = assembler.capture(tick.location, tick.events, tick.calls, tick.battery_pct, tick.time)
        truth = user.observe(row, rng) if user is not None else tick.ground_truth
        doc = channel.send_context(ContextUpload(row, client_id, tick.time, truth), sms=sms)

        suggested, relevance = None, None
        if doc.status is DocumentStatus.TRAINED:
            suggested = doc.profile
            relevance = score_relevance(suggested, truth)
            counts = counts.add(relevance)
        trace.append(TraceRow(
            tick=i,
            at=tick.time,
            phase=Phase.SERVING if suggested is not None else Phase.TRAINING,
            zone=row.zone_id,
            event=row.event_category,
            crisis=row.crisis,
            suggested=suggested,
            truth=truth,
            relevance=relevance,
        ))

    triple = counts.percentages()
    report = aggregate_relevance([triple]) if triple else EMPTY_RELEVANCE
    normal, cosmos = _timelines(trace)
    normal_hours = simulate_battery_hours(normal, capacity_mah, drain, repeat=True)
    cosmos_hours = simulate_battery_hours(cosmos, capacity_mah, drain, repeat=True)
    logger.info(
        "Scenario seed %d: %d ticks, %d suggestions, CRS %.1f%%",
        script.seed, len(trace), counts.total, report.mean_crs,
    )
    return ScenarioRun(counts, report, tuple(trace), normal_hours, cosmos_hours, server.phase)


@dataclass(frozen=True)
class SessionSummary:
    runs: Tuple[ScenarioRun, ...]
    relevance: RelevanceReport
    battery: BatteryReport


def run_sessions(script: ScenarioScript, sessions: int, user: Optional[UserModel] = None, **kwargs) -> SessionSummary:
    """Replay the script once per session, seeds counting up from the script's."""
    if sessions < 1:
        raise UsageError(f"sessions must be at least 1, got {sessions}")
    runs = tuple(
        run_scenario(replace(script, seed=script.seed + i), user, **kwargs) for i in range(sessions)
    )
    triples = [run.counts.percentages() for run in runs if run.counts.total]
    relevance = aggregate_relevance(triples) if triples else EMPTY_RELEVANCE
    battery = aggregate_battery([(run.normal_hours, run.cosmos_hours) for run in runs])
    return SessionSummary(runs, relevance, battery)


def _read_rows(path: Union[str, Path], columns: Sequence[str]) -> List[Tuple[float, ...]]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(row for row in f if not row.startswith("#"))
        missing = [c for c in columns if c not in (reader.fieldnames or ())]
        if missing:
            raise ConfigError(f"{path}: missing columns {missing}")
        rows = []
        for number, record in enumerate(reader, 2):
            try:
                rows.append(tuple(float(record[c]) for c in columns))
            except (TypeError, ValueError) as e:
                raise ConfigError(f"{path}:{number}: {e}") from e
    return rows


def read_battery_table(path: Union[str, Path]) -> List[Tuple[float, float]]:
    return _read_rows(path, ("normal_hours", "cosmos_hours"))


def read_relevance_table(path: Union[str, Path]) -> List[Tuple[float, float, float]]:
    return _read_rows(path, ("crs", "prs", "cis"))


def write_trace(path: Union[str, Path], trace: Iterable[TraceRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for row in trace:
            writer.writerow(row.fields())


REPORT_HEADER = ("session", "crs", "prs", "cis", "normal_hours", "cosmos_hours")


def write_report(path: Union[str, Path], summary: SessionSummary) -> None:
    """One row per session, then a row of means."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for i, run in enumerate(summary.runs, 1):
            triple = run.counts.percentages()
            relevance = [f"{v:.2f}" for v in triple] if triple else ["", "", ""]
            writer.writerow([i, *relevance, f"{run.normal_hours:.2f}", f"{run.cosmos_hours:.2f}"])
        r, b = summary.relevance, summary.battery
        writer.writerow([
            "mean", f"{r.mean_crs:.2f}", f"{r.mean_prs:.2f}", f"{r.mean_cis:.2f}",
            f"{b.mean_normal:.2f}", f"{b.mean_cosmos:.2f}",
        ])


def relevance_table(report: RelevanceReport, title: str = "Settings relevance") -> Table:
    table = Table(title=title)
    table.add_column("Session", justify="right")
    for name in ("CRS %", "PRS %", "CIS %"):
        table.add_column(name, justify="right")
    for i, (crs, prs, cis) in enumerate(report.sessions, 1):
        table.add_row(str(i), f"{crs:.2f}", f"{prs:.2f}", f"{cis:.2f}")
    table.add_section()
    table.add_row("[bold]mean[/bold]", f"{report.mean_crs:.2f}", f"{report.mean_prs:.2f}", f"{report.mean_cis:.2f}")
    table.caption = f"CRS + PRS = {report.cumulative_relevant:.2f}%"
    return table


def battery_table(report: BatteryReport, title: str = "Battery hours") -> Table:
    table = Table(title=title)
    table.add_column("Session", justify="right")
    table.add_column("Normal", justify="right")
    table.add_column("COSMOS", justify="right")
    for i, (normal, cosmos) in enumerate(report.sessions, 1):
        table.add_row(str(i), f"{normal:.2f}", f"{cosmos:.2f}")
    table.add_section()
    table.add_row("[bold]mean[/bold]", f"{report.mean_normal:.2f}", f"{report.mean_cosmos:.2f}")
    table.caption = f"change {report.improvement_pct:+.1f}%"
    return table
