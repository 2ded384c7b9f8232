"""Log text to time-ordered ``(event, timestamp)`` records.

Rules file format (UTF-8, tab separated, ``#`` comment lines)::

    timestamp: %H:%M:%S
    clk_drift	clock drift (?P<v>[0-9.]+)ppm	v>5.0
    peer_loss	LOS from peer

The optional ``timestamp:`` header selects how the leading timestamp of each
log line is read: ``iso`` (default), ``epoch`` or a ``strptime`` format.
"""

from __future__ import annotations

import math
import operator
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Sequence

from .model import EventFailureMatrix, EventId

__all__ = [
    "EventRule",
    "RuleSet",
    "EventRecord",
    "Diagnostic",
    "WindowConfig",
    "WindowResult",
    "StreamParser",
    "RuleError",
    "LineError",
    "compile_rules",
    "load_rules_file",
    "parse_line",
    "parse_timestamp",
    "serialize",
    "parse_window",
]

_OPS = {
    ">": operator.gt,
    "<": operator.lt,
    ">=": operator.ge,
    "<=": operator.le,
    "≥": operator.ge,
    "≤": operator.le,
}
_GUARD_RE = re.compile(r"^\s*(?P<group>\w+)\s*(?P<op>>=|<=|≥|≤|>|<)\s*(?P<value>[-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*$")
_ISO_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")
_EPOCH = datetime(1970, 1, 1)


class RuleError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"rules line {line}: {message}"
        super().__init__(message)


class LineError(ValueError):
    """A log line matched a rule but could not be turned into a record."""


@dataclass(frozen=True)
class EventRule:
    event: EventId
    pattern: re.Pattern
    guard: tuple[str, str, float] | None = None

    def match(self, line: str) -> bool:
        m = self.pattern.search(line)
        if m is None:
            return False
        if self.guard is None:
            return True
        group, op, threshold = self.guard
        raw = m.group(group)
        try:
            value = float(raw)
        except (TypeError, ValueError):
            raise LineError(f"guard group {group!r} captured non-numeric {raw!r}") from None
        return _OPS[op](value, threshold)


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[EventRule, ...] = ()
    timestamp_format: str = "iso"

    def __len__(self) -> int:
        return len(self.rules)


@dataclass(frozen=True)
class EventRecord:
    event: EventId
    timestamp: datetime
    line: int = 0

    def to_dict(self) -> dict:
        return {"event": self.event.name, "timestamp": self.timestamp.isoformat(), "line": self.line}


@dataclass(frozen=True)
class Diagnostic:
    line: int
    reason: str

    def to_dict(self) -> dict:
        return {"line": self.line, "reason": self.reason}


@dataclass(frozen=True)
class WindowConfig:
    window_length: timedelta = timedelta(seconds=60)
    dedup_within_window: bool = True

    def __post_init__(self):
        if self.window_length <= timedelta(0):
            raise ValueError("window_length must be positive")


@dataclass
class WindowResult:
    records: list[EventRecord] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)
    ignored: int = 0


def compile_rules(rules_text: str, model: EventFailureMatrix) -> RuleSet:
    rules = []
    ts_format = "iso"
    for lineno, raw in enumerate(rules_text.splitlines(), 1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        if raw.startswith("timestamp:"):
            if rules:
                raise RuleError("timestamp header must precede all rules", lineno)
            ts_format = raw[len("timestamp:"):].strip()
            if not ts_format:
                raise RuleError("empty timestamp format", lineno)
            continue
        parts = raw.split("\t")
        if len(parts) not in (2, 3):
            raise RuleError("expected '<event>\\t<regex>[\\t<group><op><threshold>]'", lineno)
        name = parts[0].strip()
        try:
            event = model.event(name)
        except KeyError:
            raise RuleError(f"unknown event {name!r}", lineno) from None
        try:
            pattern = re.compile(parts[1])
        except re.error as exc:
            raise RuleError(f"bad regex {parts[1]!r}: {exc}", lineno) from None
        guard = None
        if len(parts) == 3:
            gm = _GUARD_RE.match(parts[2])
            if gm is None:
                raise RuleError(f"malformed guard {parts[2]!r}", lineno)
            group = gm.group("group")
            if group not in pattern.groupindex:
                raise RuleError(f"guard group {group!r} not captured by pattern", lineno)
            guard = (group, gm.group("op"), float(gm.group("value")))
        rules.append(EventRule(event, pattern, guard))
    return RuleSet(tuple(rules), ts_format)


def load_rules_file(path: str | Path, model: EventFailureMatrix) -> RuleSet:
    return compile_rules(Path(path).read_text(encoding="utf-8"), model)


def parse_timestamp(line: str, ts_format: str = "iso") -> datetime:
    """Read the timestamp at the start of ``line``."""
    tokens = line.split()
    if not tokens:
        raise LineError("empty line has no timestamp")
    try:
        if ts_format == "iso":
            head = tokens[0]
            if _ISO_DATE_RE.match(head) and len(tokens) > 1:
                head = f"{head} {tokens[1]}"
            if head.endswith("Z"):
                head = head[:-1] + "+00:00"
            return datetime.fromisoformat(head)
        if ts_format == "epoch":
            return datetime.fromtimestamp(float(tokens[0]), tz=timezone.utc)
        k = len(ts_format.split())
        return datetime.strptime(" ".join(tokens[:k]), ts_format)
    except (ValueError, OverflowError) as exc:
        raise LineError(f"bad timestamp ({ts_format}): {exc}") from None


def parse_line(line: str, rules: RuleSet, ts_format: str | None = None, lineno: int = 0) -> EventRecord | None:
    """First rule (file order) whose pattern and guard pass wins.

    Returns None for irrelevant lines; raises :class:`LineError` when a
    relevant line has no readable timestamp.
    """
    for rule in rules.rules:
        if rule.match(line):
            ts = parse_timestamp(line, ts_format or rules.timestamp_format)
            return EventRecord(rule.event, ts, lineno)
    return None


def _seconds(ts: datetime) -> float:
    if ts.tzinfo is not None:
        return ts.timestamp()
    return (ts - _EPOCH).total_seconds()


def serialize(records: Iterable[EventRecord]) -> list[EventRecord]:
    return sorted(records, key=lambda r: (_seconds(r.timestamp), r.line))


class StreamParser:
    """Stateful windowed parser for a log delivered in chunks.

    Windows are tumbling buckets of ``window_length`` aligned to the epoch,
    so deduplication gives the same answer whether the log arrives whole or
    in pieces.
    """

    def __init__(self, rules: RuleSet, window: WindowConfig | None = None, first_line: int = 1):
        self.rules = rules
        self.window = window or WindowConfig()
        self.next_line = first_line
        self._last_bucket: dict[int, int] = {}

    def _bucket(self, ts: datetime) -> int:
        return math.floor(_seconds(ts) / self.window.window_length.total_seconds())

    def feed(self, chunk: str | Sequence[str]) -> WindowResult:
        lines = chunk.splitlines() if isinstance(chunk, str) else list(chunk)
        result = WindowResult()
        found = []
        for offset, line in enumerate(lines):
            lineno = self.next_line + offset
            try:
                rec = parse_line(line, self.rules, lineno=lineno)
            except LineError as exc:
                result.diagnostics.append(Diagnostic(lineno, str(exc)))
                continue
            if rec is None:
                result.ignored += 1
            else:
                found.append(rec)
        self.next_line += len(lines)

        for rec in serialize(found):
            if self.window.dedup_within_window:
                bucket = self._bucket(rec.timestamp)
                if self._last_bucket.get(rec.event.index) == bucket:
                    result.ignored += 1
                    continue
                self._last_bucket[rec.event.index] = bucket
            result.records.append(rec)
        return result


def parse_window(
    lines: str | Sequence[str],
    rules: RuleSet,
    window: WindowConfig | None = None,
    first_line: int = 1,
) -> WindowResult:
    return StreamParser(rules, window, first_line).feed(lines)
