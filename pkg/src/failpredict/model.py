"""Event/failure universe and the binary event-failure matrix.

A model config is a small line-oriented text file::

    # optical line card
    events: clk_drift temp_high osnr_low peer_loss
    failure card_reset: clk_drift temp_high peer_loss
    failure link_down: osnr_low peer_loss

Events get their index from their position on the ``events:`` line, which is
also the global temporal order: within every failure the listed events must
appear in increasing index order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

__all__ = [
    "EventId",
    "FailureId",
    "EventMask",
    "EventFailureMatrix",
    "ModelError",
    "ValidationReport",
    "MAX_CHAIN_LENGTH",
    "load_model",
    "load_model_file",
    "validate_matrix",
    "row_mask",
]

# Longest chain for which the hop-based probability stays non-negative.
MAX_CHAIN_LENGTH = 4

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-]*$")
_FAILURE_RE = re.compile(r"^failure\s+(?P<name>\S+?)\s*:(?P<events>.*)$")


class ModelError(ValueError):
    """Raised when a model config cannot be turned into a valid matrix."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True, order=True)
class EventId:
    index: int
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, order=True)
class FailureId:
    index: int
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class EventMask:
    """Fixed-width bit vector over the event universe.

    Bit ``j - 1`` of ``bits`` stands for event ``j``.
    """

    width: int
    bits: int = 0

    def __post_init__(self):
        if self.width < 0:
            raise ValueError("mask width must be non-negative")
        if self.bits < 0 or self.bits >> self.width:
            raise ValueError(f"bits 0x{self.bits:x} do not fit in width {self.width}")

    @classmethod
    def of(cls, width: int, events: Iterable[int]) -> "EventMask":
        bits = 0
        for j in events:
            if not 1 <= j <= width:
                raise ValueError(f"event index {j} outside 1..{width}")
            bits |= 1 << (j - 1)
        return cls(width, bits)

    def with_event(self, j: int) -> "EventMask":
        if not 1 <= j <= self.width:
            raise ValueError(f"event index {j} outside 1..{self.width}")
        return EventMask(self.width, self.bits | (1 << (j - 1)))

    def __contains__(self, j: int) -> bool:
        return 1 <= j <= self.width and bool(self.bits >> (j - 1) & 1)

    def __and__(self, other: "EventMask") -> "EventMask":
        if other.width != self.width:
            raise ValueError("mask widths differ")
        return EventMask(self.width, self.bits & other.bits)

    def __iter__(self):
        """Indices of set events, ascending."""
        return (j for j in range(1, self.width + 1) if self.bits >> (j - 1) & 1)

    def __len__(self) -> int:
        return bin(self.bits).count("1")

    def to_list(self) -> list[int]:
        return [(self.bits >> j) & 1 for j in range(self.width)]

    def __str__(self) -> str:
        return "".join(str(b) for b in self.to_list())


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def lines(self) -> list[str]:
        return [f"violation: {v}" for v in self.violations] + [
            f"warning: {w}" for w in self.warnings
        ]


@dataclass(frozen=True)
class EventFailureMatrix:
    """N x M binary matrix; row i marks the ordered events leading to failure i.

    ``sequences`` keeps each failure's events in declared order so the
    temporal-order invariant can still be checked after construction.
    """

    events: tuple[EventId, ...]
    failures: tuple[FailureId, ...]
    sequences: tuple[tuple[int, ...], ...]
    _event_by_name: dict = field(init=False, repr=False, compare=False)
    _failure_by_name: dict = field(init=False, repr=False, compare=False)
    _rows: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.sequences) != len(self.failures):
            raise ValueError("one event sequence per failure required")
        object.__setattr__(self, "_event_by_name", {e.name: e for e in self.events})
        object.__setattr__(self, "_failure_by_name", {f.name: f for f in self.failures})
        rows = []
        for seq in self.sequences:
            bits = 0
            for j in seq:
                if not 1 <= j <= len(self.events):
                    raise ValueError(f"event index {j} outside 1..{len(self.events)}")
                bits |= 1 << (j - 1)
            rows.append(bits)
        object.__setattr__(self, "_rows", tuple(rows))

    @classmethod
    def from_sequences(
        cls,
        event_names: Sequence[str],
        failures: Sequence[tuple[str, Sequence[str]]],
    ) -> "EventFailureMatrix":
        events = tuple(EventId(k, n) for k, n in enumerate(event_names, 1))
        index = {e.name: e.index for e in events}
        return cls(
            events,
            tuple(FailureId(i, name) for i, (name, _) in enumerate(failures, 1)),
            tuple(tuple(index[n] for n in seq) for _, seq in failures),
        )

    @classmethod
    def from_grid(
        cls,
        grid: Sequence[Sequence[int]],
        event_names: Sequence[str] | None = None,
        failure_names: Sequence[str] | None = None,
    ) -> "EventFailureMatrix":
        """Build from a 0/1 grid; column order is taken as temporal order."""
        n_events = len(grid[0]) if grid else len(event_names or ())
        if any(len(r) != n_events for r in grid):
            raise ValueError("ragged grid")
        event_names = list(event_names or (f"E{j}" for j in range(1, n_events + 1)))
        failure_names = list(failure_names or (f"F{i}" for i in range(1, len(grid) + 1)))
        return cls(
            tuple(EventId(k, n) for k, n in enumerate(event_names, 1)),
            tuple(FailureId(i, n) for i, n in enumerate(failure_names, 1)),
            tuple(tuple(j for j, v in enumerate(r, 1) if v) for r in grid),
        )

    @property
    def n_events(self) -> int:
        return len(self.events)

    @property
    def n_failures(self) -> int:
        return len(self.failures)

    @property
    def rows(self) -> tuple[int, ...]:
        """Row bit patterns, bit ``j - 1`` for event ``j``."""
        return self._rows

    def cell(self, i: int, j: int) -> int:
        return (self._rows[i - 1] >> (j - 1)) & 1

    def chain(self, i: int) -> tuple[int, ...]:
        """Set columns of row ``i`` in column order."""
        bits = self._rows[i - 1]
        return tuple(j for j in range(1, self.n_events + 1) if bits >> (j - 1) & 1)

    def event(self, key: int | str | EventId) -> EventId:
        if isinstance(key, EventId):
            key = key.index
        if isinstance(key, str):
            try:
                return self._event_by_name[key]
            except KeyError:
                raise KeyError(f"unknown event {key!r}") from None
        if not 1 <= key <= self.n_events:
            raise KeyError(f"event index {key} outside 1..{self.n_events}")
        return self.events[key - 1]

    def failure(self, key: int | str | FailureId) -> FailureId:
        if isinstance(key, FailureId):
            key = key.index
        if isinstance(key, str):
            try:
                return self._failure_by_name[key]
            except KeyError:
                raise KeyError(f"unknown failure {key!r}") from None
        if not 1 <= key <= self.n_failures:
            raise KeyError(f"failure index {key} outside 1..{self.n_failures}")
        return self.failures[key - 1]

    def grid(self) -> list[list[int]]:
        return [[self.cell(i, j) for j in range(1, self.n_events + 1)]
                for i in range(1, self.n_failures + 1)]

    def to_grid_text(self) -> str:
        """One row per line of 0/1 characters, event 1 first."""
        return "".join("".join(map(str, row)) + "\n" for row in self.grid())

    def to_config(self) -> str:
        out = ["events: " + " ".join(e.name for e in self.events)]
        for f, seq in zip(self.failures, self.sequences):
            out.append(f"failure {f.name}: " + " ".join(self.events[j - 1].name for j in seq))
        return "\n".join(out) + "\n"


def _split_names(text: str) -> list[str]:
    return [t for t in re.split(r"[\s,]+", text.strip()) if t]


def load_model(config_text: str) -> EventFailureMatrix:
    events: list[str] | None = None
    event_index: dict[str, int] = {}
    failures: list[tuple[str, list[str]]] = []
    seen_failures: dict[str, int] = {}

    for lineno, raw in enumerate(config_text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if events is None:
            if not line.startswith("events:"):
                raise ModelError("first line must be 'events: <name>+'", lineno)
            events = _split_names(line[len("events:"):])
            if not events:
                raise ModelError("no events declared", lineno)
            for k, name in enumerate(events, 1):
                if not _NAME_RE.match(name):
                    raise ModelError(f"bad event name {name!r}", lineno)
                if name in event_index:
                    raise ModelError(f"duplicate event name {name!r}", lineno)
                event_index[name] = k
            continue

        m = _FAILURE_RE.match(line)
        if m is None:
            raise ModelError(f"expected 'failure <name>: <event>+', got {line!r}", lineno)
        name = m.group("name")
        if not _NAME_RE.match(name):
            raise ModelError(f"bad failure name {name!r}", lineno)
        if name in seen_failures:
            raise ModelError(f"duplicate failure name {name!r}", lineno)
        if name in event_index:
            raise ModelError(f"failure name {name!r} clashes with an event name", lineno)
        seq = _split_names(m.group("events"))
        if not seq:
            raise ModelError(f"failure {name!r} has an empty event sequence", lineno)
        for ev in seq:
            if ev not in event_index:
                raise ModelError(f"unknown event {ev!r} in failure {name!r}", lineno)
        idx = [event_index[ev] for ev in seq]
        if any(a >= b for a, b in zip(idx, idx[1:])):
            raise ModelError(f"failure {name!r}: events out of temporal order", lineno)
        seen_failures[name] = lineno
        failures.append((name, seq))

    if events is None:
        raise ModelError("model declares no events")
    if not failures:
        raise ModelError("model declares no failures")

    matrix = EventFailureMatrix.from_sequences(events, failures)
    first_row: dict[int, str] = {}
    for f, bits in zip(matrix.failures, matrix.rows):
        if bits in first_row:
            raise ModelError(
                f"failures {first_row[bits]!r} and {f.name!r} have identical event "
                "signatures (duplicate rows)",
                seen_failures[f.name],
            )
        first_row[bits] = f.name
    return matrix


def load_model_file(path: str | Path) -> EventFailureMatrix:
    return load_model(Path(path).read_text(encoding="utf-8"))


def validate_matrix(m: EventFailureMatrix) -> ValidationReport:
    """Check the matrix invariants; never raises."""
    report = ValidationReport()
    seen: dict[int, FailureId] = {}
    for f, seq, bits in zip(m.failures, m.sequences, m.rows):
        if bits == 0:
            report.violations.append(f"{f.name}: empty failure row")
            continue
        if any(a >= b for a, b in zip(seq, seq[1:])):
            report.violations.append(f"{f.name}: events out of temporal order")
        if bits in seen:
            report.violations.append(
                f"{f.name}: duplicate failure signature (same row as {seen[bits].name})"
            )
        else:
            seen[bits] = f
        n = bin(bits).count("1")
        if n > MAX_CHAIN_LENGTH:
            report.warnings.append(
                f"{f.name}: chain length {n} exceeds the hop-probability domain "
                f"(max {MAX_CHAIN_LENGTH}); probabilities beyond it are clamped to 0"
            )
    return report


def row_mask(m: EventFailureMatrix, f: int | str | FailureId) -> EventMask:
    failure = m.failure(f)
    return EventMask(m.n_events, m.rows[failure.index - 1])
