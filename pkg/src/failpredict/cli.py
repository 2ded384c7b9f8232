"""Command line entry point.

Exit codes
----------
validate: 0 valid, 1 violations or unreadable model.
predict/watch: 0 no prediction, 3 terminal prediction at or above the
threshold, 4 only invalid sequences seen, 1 on errors.  argparse usage
errors exit 2.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from datetime import timedelta
from pathlib import Path

from .engine import EnginePolicy, Strictness
from .graph import build_dag, build_hop_matrix, render_artifact
from .model import ModelError, load_model_file, validate_matrix
from .parser import RuleError, WindowConfig, load_rules_file
from .pipeline import Outcome, Pipeline, classify, render_csv, render_jsonl, render_trace, watch
from .source import FetchHook

EXIT_ERROR = 1

_DURATION_RE = re.compile(r"^\s*([0-9]*\.?[0-9]+)\s*(ms|s|m|h)?\s*$")
_UNITS = {"ms": 0.001, "s": 1, "m": 60, "h": 3600, None: 1}


def parse_duration(text: str) -> timedelta:
    m = _DURATION_RE.match(str(text))
    if m is None:
        raise argparse.ArgumentTypeError(f"bad duration {text!r} (use e.g. 500ms, 5s, 2m, 1h)")
    return timedelta(seconds=float(m.group(1)) * _UNITS[m.group(2)])


def _probability(text: str) -> float:
    p = float(text)
    if not 0.0 <= p <= 1.0:
        raise argparse.ArgumentTypeError("threshold must be within [0, 1]")
    return p


def _engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--rules", required=True, type=Path)
    p.add_argument("--no-prune", dest="prune", action="store_false",
                   help="disable event bit-mask pruning")
    p.add_argument("--lenient", action="store_true",
                   help="ignore non-edge events instead of declaring invalid sequences")
    p.add_argument("--threshold", type=_probability, default=0.9,
                   help="alert threshold probability (default 0.9)")
    p.add_argument("--timeout", type=parse_duration, default=None,
                   help="close sessions idle longer than this (log time)")
    p.add_argument("--window", type=parse_duration, default=timedelta(seconds=60),
                   help="dedup window length (default 60s)")
    p.add_argument("--no-dedup", dest="dedup", action="store_false")
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--trace", action="store_true",
                   help="print a per-event candidate table instead of records")
    p.add_argument("--out", type=Path, default=None, help="write records here")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="failpredict", description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, help="JSON file supplying defaults for any flag")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a model config")
    p.add_argument("--model", required=True, type=Path)

    p = sub.add_parser("build", help="dump the DAG and hop matrix")
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("predict", help="run prediction over a log file")
    _engine_flags(p)
    p.add_argument("--log", required=True, type=Path)

    p = sub.add_parser("watch", help="poll a growing log file")
    _engine_flags(p)
    p.add_argument("--path", required=True, type=Path)
    p.add_argument("--interval", type=parse_duration, default=timedelta(seconds=5))
    p.add_argument("--checkpoint", type=Path, default=None)
    p.add_argument("--fetch", default=None,
                   help="shell command staging the log; {dest} expands to --path")
    p.add_argument("--max-cycles", type=int, default=None)
    return ap


def _apply_config(ap: argparse.ArgumentParser, argv: list[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(argv)
    if known.config is None:
        return
    values = json.loads(known.config.read_text(encoding="utf-8"))
    values = {k.replace("-", "_"): v for k, v in values.items()}
    for action in ap._subparsers._group_actions:  # noqa: SLF001
        for sub in action.choices.values():
            defaults = {}
            for a in sub._actions:  # noqa: SLF001
                if a.dest in values:
                    v = values[a.dest]
                    if a.type is not None and isinstance(v, str):
                        v = a.type(v)
                    defaults[a.dest] = v
                    a.required = False
            sub.set_defaults(**defaults)


def _policy(args) -> EnginePolicy:
    return EnginePolicy(
        pruning=args.prune,
        strictness=Strictness.LENIENT if args.lenient else Strictness.STRICT,
        alert_threshold=args.threshold,
        session_timeout=args.timeout,
    )


def _render(reports, args, header: bool) -> str:
    if args.format == "csv":
        return render_csv(reports, header=header)
    return render_jsonl(reports)


def _load_pipeline(args) -> Pipeline:
    model = load_model_file(args.model)
    rules = load_rules_file(args.rules, model)
    return Pipeline(model, rules, _policy(args), WindowConfig(args.window, args.dedup))


def cmd_validate(args) -> int:
    model = load_model_file(args.model)
    report = validate_matrix(model)
    for line in report.lines():
        print(line)
    if report.ok:
        print(f"ok: {model.n_failures} failures over {model.n_events} events")
        return 0
    return 1


def cmd_build(args) -> int:
    model = load_model_file(args.model)
    report = validate_matrix(model)
    if not report.ok:
        for line in report.lines():
            print(line, file=sys.stderr)
        return EXIT_ERROR
    text = render_artifact(build_dag(model), build_hop_matrix(model))
    if args.out:
        args.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_predict(args) -> int:
    pipeline = _load_pipeline(args)
    reports = pipeline.feed(args.log.read_text(encoding="utf-8", errors="replace"))
    for d in pipeline.diagnostics:
        print(f"{args.log}:{d.line}: {d.reason}", file=sys.stderr)
    structured = _render(reports, args, header=True)
    if args.out:
        args.out.write_text(structured, encoding="utf-8")
    if args.trace:
        sys.stdout.write(render_trace(reports))
    elif not args.out:
        sys.stdout.write(structured)
    return int(classify(reports, args.threshold))


def cmd_watch(args) -> int:
    pipeline = _load_pipeline(args)
    seen = []
    out = args.out.open("a", encoding="utf-8") if args.out else None
    header = [args.format == "csv"]

    def emit(reports):
        seen.extend(reports)
        text = render_trace(reports) if args.trace and out is None else _render(reports, args, header[0])
        header[0] = False
        (out or sys.stdout).write(text)
        (out or sys.stdout).flush()
        if args.trace and out is not None:
            sys.stdout.write(render_trace(reports))
            sys.stdout.flush()

    def heartbeat(cycle):
        print(f"heartbeat cycle={cycle} no new events", file=sys.stderr)

    hook = FetchHook(args.fetch, args.path) if args.fetch else None
    try:
        watch(pipeline, args.path, emit, interval=args.interval.total_seconds(),
              checkpoint_path=args.checkpoint, fetch_hook=hook,
              max_cycles=args.max_cycles, heartbeat=heartbeat)
    finally:
        if out is not None:
            out.close()
    return int(classify(seen, args.threshold))


_COMMANDS = {
    "validate": cmd_validate,
    "build": cmd_build,
    "predict": cmd_predict,
    "watch": cmd_watch,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        _apply_config(ap, argv)
    except (OSError, ValueError, argparse.ArgumentTypeError) as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_ERROR
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (ModelError, RuleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
