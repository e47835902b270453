"""
Spacetime model and no-signalling audit
Geometry and clock synchronisation of the two verifier-prover pairs, simulated
timestamps for every round, and the light-cone check over transcripts.
"""

import enum
import heapq
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, List, Optional, Tuple, Union

import numpy as np
from dotenv import dotenv_values

from relzk.errors import ConfigurationError, MalformedTranscriptError
from relzk.protocol import SessionConfig, SessionResult, honest_provers, run_session, session_streams
from relzk.transcript import TranscriptBlock, TranscriptRecord

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT_M_PER_S = 299_792_458

# FPGA cycles: 35 measured, 14 internal to the verifier, 3 of trigger jitter
SHORT_DISTANCE_CYCLES = 35 - 14 + 3


class SyncModel(str, enum.Enum):
    GPS = "gps"
    TRIGGER = "trigger"


@dataclass(frozen=True)
class SpacetimeConfig:
    separation_m: float
    sync_model: SyncModel = SyncModel.TRIGGER
    accuracy_ns: float = 174.0
    fibre_delay_ns: float = 440.0
    jitter_ns: float = 24.0
    compensation_delay_ns: float = 440.0
    exchange_ns: float = 192.0
    rate_hz: float = 3e6
    cycle_ns: float = 8.0

    def __post_init__(self):
        if self.separation_m <= 0:
            raise ConfigurationError(f"separation_m must be positive, got {self.separation_m}")
        for name in ("accuracy_ns", "fibre_delay_ns", "jitter_ns", "compensation_delay_ns", "exchange_ns", "cycle_ns"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.rate_hz <= 0:
            raise ConfigurationError(f"rate_hz must be positive, got {self.rate_hz}")

    @property
    def sync_slack_ns(self) -> float:
        """Trigger jitter is already inside exchange_ns; GPS adds its accuracy"""
        return self.accuracy_ns if self.sync_model == SyncModel.GPS else 0.0

    @property
    def period_ns(self) -> float:
        return 1e9 / self.rate_hz

    def with_separation(self, separation_m: float) -> "SpacetimeConfig":
        return replace(self, separation_m=separation_m)


SHORT_DISTANCE = SpacetimeConfig(
    separation_m=60.0,
    sync_model=SyncModel.TRIGGER,
    jitter_ns=24.0,
    compensation_delay_ns=440.0,
    fibre_delay_ns=440.0,
    exchange_ns=SHORT_DISTANCE_CYCLES * 8.0,
    rate_hz=3e6,
    cycle_ns=8.0,
)

LONG_DISTANCE = SpacetimeConfig(
    separation_m=390.0,
    sync_model=SyncModel.GPS,
    accuracy_ns=150.0 + 24.0,
    exchange_ns=840.0,
    rate_hz=3e5,
)

PRESETS = {"short": SHORT_DISTANCE, "long": LONG_DISTANCE}


def light_travel_ns(distance_m: float) -> float:
    if distance_m < 0:
        raise ConfigurationError(f"distance must be >= 0, got {distance_m}")
    return distance_m / SPEED_OF_LIGHT_M_PER_S * 1e9


def min_separation_m(exchange_time_ns: float, sync_slack_ns: float = 0.0) -> float:
    if exchange_time_ns < 0 or sync_slack_ns < 0:
        raise ConfigurationError("durations must be >= 0")
    return (exchange_time_ns + sync_slack_ns) * 1e-9 * SPEED_OF_LIGHT_M_PER_S


# Config files

_FLOAT_KEYS = ("separation_m", "accuracy_ns", "fibre_delay_ns", "jitter_ns", "compensation_delay_ns", "exchange_ns", "rate_hz", "cycle_ns")


def parse_spacetime_values(values: dict, base: SpacetimeConfig = SHORT_DISTANCE) -> SpacetimeConfig:
    """Overlay flat key/value settings on a base config"""
    unknown = set(values) - set(_FLOAT_KEYS) - {"sync_model", "preset"}
    if unknown:
        raise ConfigurationError(f"unknown spacetime keys: {', '.join(sorted(unknown))}")
    if values.get("preset"):
        if values["preset"] not in PRESETS:
            raise ConfigurationError(f"unknown preset {values['preset']!r}")
        base = PRESETS[values["preset"]]

    overrides = {}
    for key in _FLOAT_KEYS:
        raw = values.get(key)
        if raw is None or raw == "":
            continue
        try:
            overrides[key] = float(raw)
        except ValueError:
            raise ConfigurationError(f"{key} must be a number, got {raw!r}")
    if values.get("sync_model"):
        try:
            overrides["sync_model"] = SyncModel(values["sync_model"].strip().lower())
        except ValueError:
            raise ConfigurationError(f"sync_model must be gps or trigger, got {values['sync_model']!r}")
    return replace(base, **overrides)


def load_spacetime_config(path: Optional[Union[str, Path]]) -> SpacetimeConfig:
    """Read a `key = value` file; no path means the short-distance deployment"""
    if path is None:
        return SHORT_DISTANCE
    if not Path(path).is_file():
        raise ConfigurationError(f"spacetime config {path} not found")
    return parse_spacetime_values(dict(dotenv_values(path)))


def format_spacetime_config(cfg: SpacetimeConfig) -> str:
    values = asdict(cfg)
    values["sync_model"] = cfg.sync_model.value
    return "".join(f"{key} = {value}\n" for key, value in values.items())


# Timestamps

@dataclass(eq=False)
class TimedTranscript:
    """Round indices and (N, 4) stamps: emit_left, recv_left, emit_right, recv_right"""

    rounds: np.ndarray
    stamps: np.ndarray

    def __post_init__(self):
        self.stamps = np.asarray(self.stamps, dtype=np.int64).reshape(-1, 4)
        self.rounds = np.asarray(self.rounds, dtype=np.int64)
        if self.stamps.shape[0] != self.rounds.shape[0]:
            raise MalformedTranscriptError(f"{self.rounds.shape[0]} rounds but {self.stamps.shape[0]} timestamp rows")
        late = np.flatnonzero((self.stamps[:, 1] < self.stamps[:, 0]) | (self.stamps[:, 3] < self.stamps[:, 2]))
        if late.size:
            raise MalformedTranscriptError(f"round {int(self.rounds[late[0]])}: answer received before challenge emitted")

    @classmethod
    def from_records(cls, records: Iterable[TranscriptRecord]) -> "TimedTranscript":
        rounds, stamps = [], []
        for rec in records:
            rounds.append(rec.round)
            stamps.append((rec.t_emit_left, rec.t_recv_left, rec.t_emit_right, rec.t_recv_right))
        return cls(np.array(rounds, dtype=np.int64), np.array(stamps, dtype=np.int64))

    @classmethod
    def from_blocks(cls, blocks: Iterable[TranscriptBlock]) -> "TimedTranscript":
        blocks = list(blocks)
        if not blocks:
            return cls(np.zeros(0, dtype=np.int64), np.zeros((0, 4), dtype=np.int64))
        return cls(np.concatenate([b.rounds for b in blocks]), np.concatenate([b.stamps for b in blocks]))

    def __len__(self) -> int:
        return int(self.rounds.shape[0])


@dataclass
class Violation:
    round: int
    side: str
    margin_ns: float


@dataclass
class AuditReport:
    rounds: int
    separation_m: float
    violations: List[Violation] = field(default_factory=list)
    worst_margin_ns: Optional[float] = None

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_lines(self) -> List[str]:
        lines = [f"violation round={v.round} side={v.side} margin_ns={v.margin_ns:.3f}" for v in self.violations]
        worst = "none" if self.worst_margin_ns is None else f"{self.worst_margin_ns:.3f}"
        lines.append(f"summary rounds={self.rounds} violations={len(self.violations)} worst_margin_ns={worst}")
        return lines


class NoSignallingAuditor:
    """
    Incremental light-cone audit. Side X passes a round iff its answer arrived before
    emit_Y + light_travel - slack, Y being the other side.
    """

    def __init__(self, cfg: SpacetimeConfig):
        self.cfg = cfg
        self.allowance_ns = light_travel_ns(cfg.separation_m) - cfg.sync_slack_ns
        self.rounds = 0
        self.worst_margin_ns: Optional[float] = None
        self._violations: List[Tuple[int, str, float]] = []

    def feed(self, rounds: np.ndarray, stamps: np.ndarray) -> None:
        if len(rounds) == 0:
            return
        emit_l, recv_l, emit_r, recv_r = (stamps[:, k].astype(np.float64) for k in range(4))
        margin_l = emit_r + self.allowance_ns - recv_l
        margin_r = emit_l + self.allowance_ns - recv_r
        worst = float(min(margin_l.min(), margin_r.min()))
        self.worst_margin_ns = worst if self.worst_margin_ns is None else min(self.worst_margin_ns, worst)
        self.rounds += len(rounds)

        bad_l = margin_l <= 0
        bad_r = margin_r <= 0
        if bad_l.any() or bad_r.any():
            order = np.flatnonzero(bad_l | bad_r)
            for idx in order.tolist():
                if bad_l[idx]:
                    self._violations.append((int(rounds[idx]), "left", float(margin_l[idx])))
                if bad_r[idx]:
                    self._violations.append((int(rounds[idx]), "right", float(margin_r[idx])))

    def write_block(self, block: TranscriptBlock) -> None:
        self.feed(block.rounds, block.stamps)

    def report(self) -> AuditReport:
        violations = [Violation(n, side, margin) for n, side, margin in self._violations]
        return AuditReport(self.rounds, self.cfg.separation_m, violations, self.worst_margin_ns)


def audit_no_signalling(tt: TimedTranscript, cfg: SpacetimeConfig) -> AuditReport:
    auditor = NoSignallingAuditor(cfg)
    auditor.feed(tt.rounds, tt.stamps)
    report = auditor.report()
    logger.info(f"Audit at {cfg.separation_m} m: {len(report.violations)} violations over {report.rounds} rounds")
    return report


def audit_records(records: Iterable[TranscriptRecord], cfg: SpacetimeConfig, chunk: int = 65536) -> AuditReport:
    """Audit a record stream chunk by chunk"""
    auditor = NoSignallingAuditor(cfg)
    buffer: List[TranscriptRecord] = []
    for rec in records:
        buffer.append(rec)
        if len(buffer) >= chunk:
            tt = TimedTranscript.from_records(buffer)
            auditor.feed(tt.rounds, tt.stamps)
            buffer = []
    if buffer:
        tt = TimedTranscript.from_records(buffer)
        auditor.feed(tt.rounds, tt.stamps)
    return auditor.report()


def round_starts_ns(cfg: SpacetimeConfig, first_round: int, count: int) -> np.ndarray:
    rounds = np.arange(first_round, first_round + count, dtype=np.float64)
    return np.rint(rounds * cfg.period_ns).astype(np.int64)


def recorded_emissions(cfg: SpacetimeConfig, starts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Challenge emission on each verifier's local clock"""
    if cfg.sync_model == SyncModel.TRIGGER:
        # left delays its own trigger to match the fibre run to the right
        return starts + int(round(cfg.compensation_delay_ns)), starts + int(round(cfg.fibre_delay_ns))
    return starts, starts


class SimulatedTimeline:
    """
    Recorded local-clock stamps plus a hidden true timeline. Trigger: true exchange is
    exchange_ns - jitter_ns and the right clock lags by up to jitter_ns. GPS: exchange
    is exact and the right clock is off by up to accuracy_ns either way.
    """

    def __init__(self, cfg: SpacetimeConfig, timing_seed=None):
        self.cfg = cfg
        self._rng = np.random.default_rng(timing_seed)
        self.light_ns = light_travel_ns(cfg.separation_m)
        self.true_violations = 0
        self.worst_true_margin_ns: Optional[float] = None

    def stamps(self, first_round: int, count: int):
        """Columns (emit_l, recv_l, emit_r, recv_r) read off the event queue"""
        if count == 0:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty.copy(), empty.copy(), empty.copy()
        timed = timed_transcript_from_events(schedule_events(self.cfg, first_round, count))
        emit_l, recv_l, emit_r, recv_r = (np.ascontiguousarray(column) for column in timed.stamps.T)
        self._track_truth(emit_l, emit_r, count)
        return emit_l, recv_l, emit_r, recv_r

    def _track_truth(self, emit_l: np.ndarray, emit_r: np.ndarray, count: int) -> None:
        cfg = self.cfg
        if cfg.sync_model == SyncModel.TRIGGER:
            skew = self._rng.uniform(0.0, cfg.jitter_ns, size=count)
            latency = cfg.exchange_ns - cfg.jitter_ns
        else:
            skew = self._rng.uniform(-cfg.accuracy_ns, cfg.accuracy_ns, size=count)
            latency = cfg.exchange_ns
        true_emit_l = emit_l.astype(np.float64)
        true_emit_r = emit_r + skew
        margin_l = true_emit_r + self.light_ns - (true_emit_l + latency)
        margin_r = true_emit_l + self.light_ns - (true_emit_r + latency)
        worst = np.minimum(margin_l, margin_r)
        self.true_violations += int(np.count_nonzero(worst <= 0))
        if count:
            low = float(worst.min())
            self.worst_true_margin_ns = low if self.worst_true_margin_ns is None else min(self.worst_true_margin_ns, low)


@dataclass(frozen=True)
class Event:
    time_ns: int
    round: int
    side: str
    kind: str


def schedule_events(cfg: SpacetimeConfig, first_round: int, count: int) -> List[Event]:
    """Emission and reception events of both pairs, popped in time order from one queue"""
    queue: List[Tuple[int, int, int, Event]] = []
    starts = round_starts_ns(cfg, first_round, count)
    emit_l, emit_r = recorded_emissions(cfg, starts)
    exchange = int(round(cfg.exchange_ns))
    sequence = 0
    for offset in range(count):
        n = first_round + offset
        for side, emit in (("left", int(emit_l[offset])), ("right", int(emit_r[offset]))):
            for kind, at in (("emit", emit), ("recv", emit + exchange)):
                heapq.heappush(queue, (at, n, sequence, Event(at, n, side, kind)))
                sequence += 1
    ordered = []
    while queue:
        ordered.append(heapq.heappop(queue)[3])
    return ordered


def timed_transcript_from_events(events: Iterable[Event]) -> TimedTranscript:
    slots = {("left", "emit"): 0, ("left", "recv"): 1, ("right", "emit"): 2, ("right", "recv"): 3}
    table = {}
    for event in events:
        table.setdefault(event.round, [None] * 4)[slots[(event.side, event.kind)]] = event.time_ns
    rounds = sorted(table)
    missing = [n for n in rounds if None in table[n]]
    if missing:
        raise MalformedTranscriptError(f"round {missing[0]}: incomplete timestamps")
    return TimedTranscript(np.array(rounds, dtype=np.int64), np.array([table[n] for n in rounds], dtype=np.int64))


class _Tee:
    def __init__(self, *sinks):
        self.sinks = [s for s in sinks if s is not None]

    def write_block(self, block: TranscriptBlock) -> None:
        for sink in self.sinks:
            sink.write_block(block)


@dataclass
class TimedSession:
    session: SessionResult
    audit: AuditReport
    true_violations: int
    worst_true_margin_ns: Optional[float]
    simulated_duration_ns: int


def simulate_timed_session(
    cfg: SpacetimeConfig,
    session: SessionConfig,
    prover_left=None,
    prover_right=None,
    transcript_sink=None,
) -> TimedSession:
    """Honest (or supplied) provers on the simulated clocks, audited as the rounds stream"""
    if prover_left is None or prover_right is None:
        prover_left, prover_right = honest_provers(session)
    timeline = SimulatedTimeline(cfg, session_streams(session.seed).timing)
    auditor = NoSignallingAuditor(cfg)
    result = run_session(session, prover_left, prover_right, _Tee(transcript_sink, auditor), timeline)
    audit = auditor.report()
    duration = int(round(result.rounds_run * cfg.period_ns))
    logger.info(
        f"Timed session: simulated {duration / 1e9:.3f} s, audit violations={len(audit.violations)}, "
        f"worst margin {audit.worst_margin_ns} ns"
    )
    return TimedSession(result, audit, timeline.true_violations, timeline.worst_true_margin_ns, duration)
