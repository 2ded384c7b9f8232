"""Incremental, restart-safe reading of device log files.

Logs are never touched on the device itself: an optional operator-supplied
fetch command stages a copy locally, and :func:`poll` hands back whatever
complete lines were appended since the last checkpoint.
"""

from __future__ import annotations

import hashlib
import logging
import os
import shlex
import subprocess
from dataclasses import dataclass, replace
from pathlib import Path

__all__ = [
    "Checkpoint",
    "PollResult",
    "FetchHook",
    "SourceError",
    "FetchError",
    "poll",
    "run_fetch_hook",
]

log = logging.getLogger(__name__)

# Bytes of file head hashed into the identity token.
HEAD_BYTES = 1024


class SourceError(OSError):
    pass


class FetchError(RuntimeError):
    pass


@dataclass(frozen=True)
class Checkpoint:
    """Read position in one log file.

    ``identity`` fingerprints the first ``head_len`` bytes already consumed.
    A staged copy keeps the same fingerprint even when its inode changes;
    a rotated or rewritten file does not.
    """

    identity: str = ""
    head_len: int = 0
    offset: int = 0
    line: int = 0
    last_timestamp: str = ""

    def save(self, path: str | Path) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        body = "".join(
            f"{k}={v}\n"
            for k, v in (
                ("identity", self.identity),
                ("head_len", self.head_len),
                ("offset", self.offset),
                ("line", self.line),
                ("last_timestamp", self.last_timestamp),
            )
        )
        tmp.write_text(body, encoding="utf-8")
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str | Path) -> "Checkpoint":
        path = Path(path)
        if not path.exists():
            return cls()
        values: dict[str, str] = {}
        for raw in path.read_text(encoding="utf-8").splitlines():
            if "=" in raw:
                k, v = raw.split("=", 1)
                values[k.strip()] = v.strip()
        return cls(
            identity=values.get("identity", ""),
            head_len=int(values.get("head_len", 0)),
            offset=int(values.get("offset", 0)),
            line=int(values.get("line", 0)),
            last_timestamp=values.get("last_timestamp", ""),
        )


@dataclass(frozen=True)
class PollResult:
    chunk: str
    checkpoint: Checkpoint
    rotated: bool = False

    @property
    def n_lines(self) -> int:
        return self.chunk.count("\n")


def _fingerprint(data: bytes) -> str:
    return hashlib.sha1(data).hexdigest()


def poll(path: str | Path, cp: Checkpoint | None = None) -> PollResult:
    """Return complete lines appended to ``path`` since ``cp``.

    A trailing line without newline stays in the file until it is finished.
    """
    cp = cp or Checkpoint()
    try:
        with open(path, "rb") as fh:
            size = os.fstat(fh.fileno()).st_size
            rotated = False
            if size < cp.offset:
                rotated = True
            elif cp.head_len:
                head = fh.read(cp.head_len)
                rotated = _fingerprint(head) != cp.identity
            if rotated:
                log.info("%s rotated or truncated; reading from start", path)
                cp = Checkpoint(last_timestamp=cp.last_timestamp)
            fh.seek(cp.offset)
            data = fh.read(size - cp.offset)
            head = b""
            if cp.head_len < HEAD_BYTES:
                fh.seek(0)
                head = fh.read(HEAD_BYTES)
    except OSError as exc:
        raise SourceError(f"cannot read {path}: {exc}") from exc

    end = data.rfind(b"\n") + 1
    complete = data[:end]
    if not complete:
        return PollResult("", cp, rotated)
    offset = cp.offset + end
    if cp.head_len < HEAD_BYTES:
        head_len = min(HEAD_BYTES, offset)
        identity = _fingerprint(head[:head_len])
    else:
        head_len, identity = cp.head_len, cp.identity
    new_cp = replace(
        cp,
        identity=identity,
        head_len=head_len,
        offset=offset,
        line=cp.line + complete.count(b"\n"),
    )
    return PollResult(complete.decode("utf-8", errors="replace"), new_cp, rotated)


@dataclass(frozen=True)
class FetchHook:
    """External command that stages a device log at ``staged_path``.

    ``{dest}`` in the command is replaced by the shell-quoted staged path.
    """

    command: str
    staged_path: Path
    timeout: float = 60.0


def run_fetch_hook(hook: FetchHook) -> Path:
    cmd = hook.command.replace("{dest}", shlex.quote(str(hook.staged_path)))
    try:
        proc = subprocess.run(
            cmd, shell=True, capture_output=True, text=True, timeout=hook.timeout
        )
    except subprocess.TimeoutExpired:
        raise FetchError(f"fetch command timed out after {hook.timeout}s") from None
    if proc.returncode != 0:
        detail = proc.stderr.strip().splitlines()[-1:] or [""]
        raise FetchError(f"fetch command exited {proc.returncode}: {detail[0]}")
    if not Path(hook.staged_path).exists():
        raise FetchError(f"fetch command did not produce {hook.staged_path}")
    return Path(hook.staged_path)
