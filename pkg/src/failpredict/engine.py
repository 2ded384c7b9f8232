"""DAG-driven failure prediction over a stream of event records.

Every incoming event is offered to all active sessions and, if it is a valid
start event, also opens a new session.  A session follows one hypothesised
event chain through the DAG; its event mask prunes failures whose rows can no
longer explain what has been observed.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Iterable

from .graph import Dag, HopMatrix, build_dag, build_hop_matrix, failure_probability
from .model import EventFailureMatrix, EventId, EventMask, FailureId
from .parser import EventRecord

__all__ = [
    "Strictness",
    "Verdict",
    "SessionStatus",
    "EnginePolicy",
    "PruneStats",
    "Entry",
    "PredictionReport",
    "SessionSummary",
    "Engine",
    "EngineError",
    "prune_candidates",
]


class EngineError(ValueError):
    pass


class Strictness(str, enum.Enum):
    STRICT = "strict"
    LENIENT = "lenient"


class Verdict(str, enum.Enum):
    PREDICTING = "predicting"
    INVALID_SEQUENCE = "invalid_sequence"
    REJECTED_ALL_CANDIDATES = "rejected_all_candidates"
    EXHAUSTED = "exhausted"


class SessionStatus(str, enum.Enum):
    ACTIVE = "active"
    INVALID_SEQUENCE = "invalid_sequence"
    REJECTED = "rejected_all_candidates"
    EXHAUSTED = "exhausted"


@dataclass(frozen=True)
class EnginePolicy:
    pruning: bool = True
    strictness: Strictness = Strictness.STRICT
    alert_threshold: float = 0.9
    session_timeout: timedelta | None = None
    # Skip re-pruning after leaving a node with a single out-edge.  Only
    # switched off by differential tests.
    skip_single_transition: bool = True

    def __post_init__(self):
        if not 0.0 <= self.alert_threshold <= 1.0:
            raise ValueError(f"alert_threshold {self.alert_threshold} outside [0, 1]")
        if self.session_timeout is not None and self.session_timeout <= timedelta(0):
            raise ValueError("session_timeout must be positive")
        object.__setattr__(self, "strictness", Strictness(self.strictness))


@dataclass
class PruneStats:
    and_ops: int = 0


def prune_candidates(
    mask: EventMask,
    candidates: Iterable[int],
    m: EventFailureMatrix,
    stats: PruneStats | None = None,
) -> set[int]:
    """Keep failure indices whose row covers every observed event.

    One AND per candidate: ``row & mask == mask``.
    """
    bits = mask.bits
    rows = m.rows
    kept = set()
    n = 0
    for i in candidates:
        n += 1
        if rows[i - 1] & bits == bits:
            kept.add(i)
    if stats is not None:
        stats.and_ops += n
    return kept


@dataclass(frozen=True)
class Entry:
    failure: FailureId
    hops: int
    probability: float
    alert: bool

    def to_dict(self) -> dict:
        return {
            "failure": self.failure.name,
            "hops": self.hops,
            "probability": self.probability,
            "alert": self.alert,
        }


@dataclass(frozen=True)
class PredictionReport:
    session: int
    timestamp: datetime
    event: EventId | None
    entries: tuple[Entry, ...]
    terminal: tuple[FailureId, ...]
    verdict: Verdict
    mask: EventMask
    line: int = 0

    @property
    def candidates(self) -> tuple[FailureId, ...]:
        return tuple(e.failure for e in self.entries)

    def candidate_names(self) -> set[str]:
        return {e.failure.name for e in self.entries}

    def terminal_names(self) -> set[str]:
        return {f.name for f in self.terminal}

    def to_dict(self) -> dict:
        return {
            "timestamp": self.timestamp.isoformat(),
            "event": self.event.name if self.event is not None else None,
            "session": self.session,
            "candidates": [e.to_dict() for e in self.entries],
            "terminal": [f.name for f in self.terminal],
            "verdict": self.verdict.value,
        }


@dataclass(frozen=True)
class SessionSummary:
    id: int
    current_node: EventId
    mask: EventMask
    candidates: tuple[FailureId, ...]
    status: SessionStatus
    history: tuple[EventId, ...]

    def candidate_names(self) -> set[str]:
        return {f.name for f in self.candidates}


@dataclass
class _Session:
    id: int
    node: int
    mask: EventMask
    candidates: set[int]
    last_seen: datetime
    history: list[int] = field(default_factory=list)
    status: SessionStatus = SessionStatus.ACTIVE


class Engine:
    """Prediction engine over a fixed model.

    Not safe for concurrent ``ingest`` calls; feed it from one thread in
    timestamp order.  Reports are immutable and may be handed off freely.
    """

    def __init__(
        self,
        matrix: EventFailureMatrix,
        dag: Dag,
        hops: HopMatrix,
        policy: EnginePolicy | None = None,
    ):
        m_events, n_failures = matrix.n_events, matrix.n_failures
        if hops.shape != (m_events, n_failures):
            raise EngineError(
                f"hop matrix shape {hops.shape} does not match model ({m_events}, {n_failures})"
            )
        if len(dag.adjacency) != m_events or dag.matrix.n_failures != n_failures:
            raise EngineError("DAG was not built from this model")
        self.matrix = matrix
        self.dag = dag
        self.hops = hops
        self.policy = policy or EnginePolicy()
        self.prune_stats = PruneStats()
        self._next_events = [
            frozenset(t.index for t in succ if isinstance(t, EventId)) for succ in dag.adjacency
        ]
        self._start = frozenset(e.index for e in dag.start_events)
        self._all = frozenset(range(1, n_failures + 1))
        self._sessions: dict[int, _Session] = {}
        self._ids = itertools.count(1)

    @classmethod
    def from_model(cls, matrix: EventFailureMatrix, policy: EnginePolicy | None = None) -> "Engine":
        return cls(matrix, build_dag(matrix), build_hop_matrix(matrix), policy)

    def _prune(self, mask: EventMask, candidates: Iterable[int]) -> set[int]:
        return prune_candidates(mask, candidates, self.matrix, self.prune_stats)

    def _report(self, s: _Session, record: EventRecord, verdict: Verdict) -> PredictionReport:
        entries: tuple[Entry, ...] = ()
        terminal: tuple[FailureId, ...] = ()
        if verdict is Verdict.PREDICTING:
            row = self.hops.hops[s.node - 1]
            out = []
            for i in sorted(s.candidates):
                h = row[i - 1]
                if h > 0:
                    p = failure_probability(h)
                    out.append(Entry(self.matrix.failures[i - 1], h, p, p >= self.policy.alert_threshold))
            entries = tuple(out)
            rows = self.matrix.rows
            terminal = tuple(
                self.matrix.failures[i - 1] for i in sorted(s.candidates) if rows[i - 1] == s.mask.bits
            )
        return PredictionReport(
            session=s.id,
            timestamp=record.timestamp,
            event=self.matrix.events[record.event.index - 1],
            entries=entries,
            terminal=terminal,
            verdict=verdict,
            mask=s.mask,
            line=record.line,
        )

    def _close(self, s: _Session, status: SessionStatus) -> None:
        s.status = status
        self._sessions.pop(s.id, None)

    def ingest(self, record: EventRecord) -> list[PredictionReport]:
        j = record.event.index
        if not 1 <= j <= self.matrix.n_events:
            raise EngineError(f"event index {j} outside 1..{self.matrix.n_events}")
        pruning = self.policy.pruning
        strict = self.policy.strictness is Strictness.STRICT
        reports = []
        # newest session first, so the longest-running chain reports last
        existing = sorted(self._sessions.values(), key=lambda s: s.id, reverse=True)

        if j in self._start:
            mask = EventMask.of(self.matrix.n_events, [j])
            s = _Session(
                id=next(self._ids),
                node=j,
                mask=mask,
                candidates=self._prune(mask, self._all) if pruning else set(self._all),
                last_seen=record.timestamp,
                history=[j],
            )
            self._sessions[s.id] = s
            reports.append(self._report(s, record, Verdict.PREDICTING))
            self._close_if_dead_end(s)

        for s in existing:
            if j in self._next_events[s.node - 1]:
                single = self.dag.out_degree(s.node) == 1
                s.node = j
                s.mask = s.mask.with_event(j)
                s.history.append(j)
                s.last_seen = record.timestamp
                if pruning and not (single and self.policy.skip_single_transition):
                    s.candidates = self._prune(s.mask, s.candidates)
                if not s.candidates:
                    reports.append(self._report(s, record, Verdict.REJECTED_ALL_CANDIDATES))
                    self._close(s, SessionStatus.REJECTED)
                    continue
                reports.append(self._report(s, record, Verdict.PREDICTING))
                self._close_if_dead_end(s)
            elif strict:
                reports.append(self._report(s, record, Verdict.INVALID_SEQUENCE))
                self._close(s, SessionStatus.INVALID_SEQUENCE)
        return reports

    def _close_if_dead_end(self, s: _Session) -> None:
        # only failure leaves follow: no further event can advance this session
        if not self._next_events[s.node - 1]:
            self._close(s, SessionStatus.EXHAUSTED)

    def tick(self, now: datetime) -> list[PredictionReport]:
        timeout = self.policy.session_timeout
        if timeout is None:
            return []
        reports = []
        for s in list(self._sessions.values()):
            if now - s.last_seen > timeout:
                reports.append(
                    PredictionReport(
                        session=s.id,
                        timestamp=now,
                        event=None,
                        entries=(),
                        terminal=(),
                        verdict=Verdict.EXHAUSTED,
                        mask=s.mask,
                    )
                )
                self._close(s, SessionStatus.EXHAUSTED)
        return reports

    def snapshot(self) -> list[SessionSummary]:
        ev, fl = self.matrix.events, self.matrix.failures
        return [
            SessionSummary(
                id=s.id,
                current_node=ev[s.node - 1],
                mask=s.mask,
                candidates=tuple(fl[i - 1] for i in sorted(s.candidates)),
                status=s.status,
                history=tuple(ev[j - 1] for j in s.history),
            )
            for s in sorted(self._sessions.values(), key=lambda s: s.id)
        ]
