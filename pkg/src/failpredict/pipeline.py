"""Parser + engine glue shared by batch prediction and the file watcher."""

from __future__ import annotations

import csv
import enum
import io
import json
import logging
import time
from dataclasses import replace
from pathlib import Path
from typing import Callable, Iterable

from .engine import Engine, EnginePolicy, PredictionReport, Verdict
from .model import EventFailureMatrix
from .parser import Diagnostic, RuleSet, StreamParser, WindowConfig
from .source import Checkpoint, FetchError, FetchHook, SourceError, poll, run_fetch_hook

__all__ = [
    "Pipeline",
    "Outcome",
    "classify",
    "watch",
    "render_trace",
    "render_jsonl",
    "render_csv",
    "CSV_COLUMNS",
]

log = logging.getLogger(__name__)

CSV_COLUMNS = ("timestamp", "event", "failure", "hops", "probability", "terminal", "verdict")


class Pipeline:
    def __init__(
        self,
        matrix: EventFailureMatrix,
        rules: RuleSet,
        policy: EnginePolicy | None = None,
        window: WindowConfig | None = None,
    ):
        self.engine = Engine.from_model(matrix, policy)
        self.parser = StreamParser(rules, window)
        self.diagnostics: list[Diagnostic] = []
        self.last_timestamp = None

    def feed(self, chunk: str) -> list[PredictionReport]:
        result = self.parser.feed(chunk)
        self.diagnostics.extend(result.diagnostics)
        for d in result.diagnostics:
            log.warning("line %d: %s", d.line, d.reason)
        reports = []
        for rec in result.records:
            reports += self.engine.tick(rec.timestamp)
            reports += self.engine.ingest(rec)
            self.last_timestamp = rec.timestamp
        return reports


class Outcome(enum.IntEnum):
    NO_PREDICTION = 0
    PREDICTED = 3
    INVALID_ONLY = 4


def classify(reports: Iterable[PredictionReport], threshold: float) -> Outcome:
    """Terminal prediction at or above threshold beats invalid sequences."""
    saw_invalid = False
    for r in reports:
        if r.verdict is Verdict.INVALID_SEQUENCE:
            saw_invalid = True
        terminal = set(r.terminal)
        if any(e.failure in terminal and e.probability >= threshold for e in r.entries):
            return Outcome.PREDICTED
    return Outcome.INVALID_ONLY if saw_invalid else Outcome.NO_PREDICTION


def render_jsonl(reports: Iterable[PredictionReport]) -> str:
    return "".join(json.dumps(r.to_dict()) + "\n" for r in reports)


def render_csv(reports: Iterable[PredictionReport], header: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(CSV_COLUMNS)
    for r in reports:
        ts = r.timestamp.isoformat()
        ev = r.event.name if r.event is not None else ""
        if not r.entries:
            w.writerow([ts, ev, "", "", "", "", r.verdict.value])
        terminal = set(r.terminal)
        for e in r.entries:
            w.writerow([ts, ev, e.failure.name, e.hops, repr(e.probability),
                        int(e.failure in terminal), r.verdict.value])
    return buf.getvalue()


def render_trace(reports: Iterable[PredictionReport]) -> str:
    """Per-event table: one header line per report, one line per candidate."""
    out = []
    for r in reports:
        ev = r.event.name if r.event is not None else "-"
        out.append(f"{r.timestamp.isoformat()}  {ev:<8} session {r.session:<4} {r.verdict.value}")
        terminal = set(r.terminal)
        for e in r.entries:
            flag = "!" if e.alert else " "
            tail = " TERMINAL" if e.failure in terminal else ""
            out.append(f"  {flag} [h={e.hops}] {e.failure.name} p={e.probability:.10f}{tail}")
    return "".join(line + "\n" for line in out)


def watch(
    pipeline: Pipeline,
    path: str | Path,
    emit: Callable[[list[PredictionReport]], None],
    interval: float = 5.0,
    checkpoint_path: str | Path | None = None,
    fetch_hook: FetchHook | None = None,
    max_cycles: int | None = None,
    sleep: Callable[[float], None] = time.sleep,
    heartbeat: Callable[[int], None] | None = None,
) -> Checkpoint:
    """Poll ``path`` until interrupted or ``max_cycles`` polls have run.

    The checkpoint is saved after every cycle whose reports were emitted, so
    a restart neither repeats nor skips lines.
    """
    cp = Checkpoint.load(checkpoint_path) if checkpoint_path else Checkpoint()
    pipeline.parser.next_line = cp.line + 1
    cycle = 0
    try:
        while max_cycles is None or cycle < max_cycles:
            cycle += 1
            target = Path(path)
            try:
                if fetch_hook is not None:
                    target = run_fetch_hook(fetch_hook)
                result = poll(target, cp)
            except (FetchError, SourceError) as exc:
                log.warning("cycle %d: %s", cycle, exc)
            else:
                if result.rotated:
                    pipeline.parser.next_line = 1
                reports = pipeline.feed(result.chunk)
                if reports:
                    emit(reports)
                elif heartbeat is not None:
                    heartbeat(cycle)
                cp = result.checkpoint
                if pipeline.last_timestamp is not None:
                    cp = replace(cp, last_timestamp=pipeline.last_timestamp.isoformat())
                if checkpoint_path:
                    cp.save(checkpoint_path)
            if max_cycles is None or cycle < max_cycles:
                sleep(interval)
    except KeyboardInterrupt:
        log.info("interrupted; checkpoint at offset %d", cp.offset)
    if checkpoint_path:
        cp.save(checkpoint_path)
    return cp
