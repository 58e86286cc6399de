"""
COSMOS server: observation ingest, the training/serving lifecycle and settings replies
"""

import logging
import threading
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Mapping, Optional, Sequence

from .config import CosmosConfig
from .context import CRISIS_YES, BatteryState, attribute_schema, row_values
from .dtree import Dataset, DecisionTree, TreeParams, classify, is_sufficiently_trained, train
from .errors import ProtocolError, ProtocolErrorKind, UsageError
from .protocol import (
    ContextUpload,
    DocumentStatus,
    SettingsDocument,
    build_error_xml,
    build_settings_xml,
    decode_context_sms,
    encode_sms,
    encode_sms_error,
    parse_context_xml,
)
from .settings import (
    DEFAULT_CRITICAL,
    LABEL_DOMAINS,
    SETTING_NAMES,
    CriticalServicesRepository,
    apply_battery_override,
    decide_profile,
    load_critical,
)
from .store import Observation, ObservationStore

logger = logging.getLogger(__name__)

SMS_MARKER = b"SMS "


class Phase(str, Enum):
    TRAINING = "TRAINING"
    SERVING = "SERVING"


@dataclass(frozen=True)
class ServerParams:
    min_rows: int = 50
    min_accuracy: float = 0.70
    retrain_every: int = 25
    battery_threshold: float = 15.0
    tree: TreeParams = field(default_factory=TreeParams)

    def __post_init__(self):
        if self.min_rows < 1 or self.retrain_every < 1:
            raise UsageError("min_rows and retrain_every must be at least 1")
        if not 0 <= self.min_accuracy <= 1:
            raise UsageError(f"min_accuracy must be in [0, 1], got {self.min_accuracy}")

    @classmethod
    def from_config(cls, config: CosmosConfig) -> "ServerParams":
        return cls(
            min_rows=config.min_rows,
            min_accuracy=config.min_accuracy,
            retrain_every=config.retrain_every,
            battery_threshold=config.battery_threshold,
            tree=TreeParams(min_leaf=config.min_leaf, max_depth=config.max_depth, prune=config.prune),
        )


@dataclass(frozen=True)
class ServerState:
    """What readers see: published atomically by the single writer"""

    phase: Phase = Phase.TRAINING
    trees: Optional[Mapping[str, DecisionTree]] = None
    trained_size: int = 0
    holdout_accuracy: float = 0.0
    # newest stored observation when this state was published
    latest_id: int = 0


def train_settings_trees(observations: Sequence[Observation], params: TreeParams) -> Dict[str, DecisionTree]:
    """One tree per setting over the same attribute rows."""
    rows = [obs.row for obs in observations]
    trees = {}
    for name in SETTING_NAMES:
        schema = attribute_schema(rows, LABEL_DOMAINS[name])
        data = Dataset(schema, tuple((row_values(obs.row, schema), obs.label.label(name)) for obs in observations))
        trees[name] = train(data, params)
    return trees


def holdout_accuracy(trees: Mapping[str, DecisionTree], observations: Sequence[Observation]) -> float:
    """Mean over settings of the per-setting accuracy."""
    if not observations:
        return 0.0
    total = 0.0
    for name, tree in trees.items():
        hits = sum(
            1 for obs in observations
            if classify(tree, row_values(obs.row, tree.schema))[0] == obs.label.label(name)
        )
        total += hits / len(observations)
    return total / len(trees)


class CosmosServer:
    """Single writer (ingest, retrain), many readers (context requests)"""

    def __init__(
        self,
        params: ServerParams = ServerParams(),
        store: Optional[ObservationStore] = None,
        critical: CriticalServicesRepository = DEFAULT_CRITICAL,
    ):
        self.params = params
        self.store = store if store is not None else ObservationStore()
        self.critical = critical
        self._write_lock = threading.RLock()
        self._state = ServerState(latest_id=self.store.latest_id)

    @classmethod
    def from_config(cls, config: CosmosConfig, store_path: Optional[str] = None) -> "CosmosServer":
        server = cls(
            params=ServerParams.from_config(config),
            store=ObservationStore(store_path or config.store_path),
            critical=load_critical(config.critical_file),
        )
        server.retrain_if_due()
        return server

    @property
    def state(self) -> ServerState:
        return self._state

    @property
    def phase(self) -> Phase:
        return self._state.phase

    def ingest_observation(self, upload: ContextUpload) -> int:
        if upload.observed_profile is None:
            raise UsageError("only uploads with an observed profile can be stored")
        with self._write_lock:
            seq = self.store.append(upload.row, upload.observed_profile, upload.at)
            self._state = replace(self._state, latest_id=seq)
        logger.debug("Stored observation %d from %s", seq, upload.client_id)
        return seq

    def retrain_if_due(self) -> ServerState:
        with self._write_lock:
            current = self._state
            size = len(self.store)
            if size - current.trained_size < self.params.retrain_every:
                return current

            observations = self.store.snapshot()
            cut = max(1, size * 4 // 5)
            trees = None
            accuracy = 0.0
            if size >= self.params.min_rows:
                trees = train_settings_trees(observations[:cut], self.params.tree)
                accuracy = holdout_accuracy(trees, observations[cut:])
            ready = is_sufficiently_trained(size, accuracy, self.params.min_rows, self.params.min_accuracy)

            if ready:
                state = ServerState(Phase.SERVING, trees, size, accuracy, self.store.latest_id)
                if current.phase is Phase.TRAINING:
                    logger.info("Trained on %d observations (holdout %.3f): now serving", size, accuracy)
            elif current.phase is Phase.SERVING:
                # keep the last good trees
                state = ServerState(
                    Phase.SERVING, current.trees, size, current.holdout_accuracy, self.store.latest_id
                )
                logger.warning("Retrain at %d observations reached only %.3f; keeping previous trees", size, accuracy)
            else:
                state = ServerState(Phase.TRAINING, None, size, accuracy, self.store.latest_id)
                logger.info("Still training: %d observations, holdout %.3f", size, accuracy)
            self._state = state
            return state

    def handle_context_request(self, upload: ContextUpload) -> SettingsDocument:
        state = self._state
        sequence = state.latest_id
        if state.phase is Phase.TRAINING:
            return SettingsDocument.training(sequence)
        profile = decide_profile(state.trees, upload.row)
        battery = BatteryState(
            level_pct=upload.row.battery_pct,
            threshold_pct=self.params.battery_threshold,
            crisis=upload.row.crisis == CRISIS_YES,
        )
        profile = apply_battery_override(profile, battery, self.critical)
        logger.debug("Suggested %s for %s", profile, upload.client_id)
        return SettingsDocument(profile, DocumentStatus.TRAINED, sequence)

    def exchange(self, upload: ContextUpload) -> SettingsDocument:
        """Answer first, then learn from the observed profile."""
        doc = self.handle_context_request(upload)
        if upload.observed_profile is not None:
            self.ingest_observation(upload)
            self.retrain_if_due()
        return doc

    def handle_message(self, body: bytes) -> bytes:
        """One framed request in, one framed reply out."""
        if body.startswith(SMS_MARKER):
            try:
                upload = decode_context_sms(body[len(SMS_MARKER):].decode("ascii"))
            except UnicodeDecodeError:
                return SMS_MARKER + encode_sms_error(ProtocolErrorKind.MALFORMED).encode("ascii")
            except ProtocolError as e:
                logger.warning("Rejected SMS request: %s", e)
                return SMS_MARKER + encode_sms_error(e.kind).encode("ascii")
            return SMS_MARKER + encode_sms(self.exchange(upload)).encode("ascii")

        try:
            upload = parse_context_xml(body)
        except ProtocolError as e:
            logger.warning("Rejected request: %s", e)
            return build_error_xml(e.kind, e.message)
        return build_settings_xml(self.exchange(upload))
