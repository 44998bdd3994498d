"""Debugger session driver over the GDB machine interface.

One :class:`DebuggerSession` owns one debugger subprocess (or a replayed
transcript of one) and exposes the operations the command engine needs:
load an executable, run to a line, evaluate expressions, list the stack,
and step while recording stops at a filtered set of lines.

Every raw protocol line that crosses the boundary is appended to the
session transcript, so a live run can be captured once and replayed
byte-for-byte in tests with no debugger installed.
"""

from __future__ import annotations

import json
import os
import queue
import subprocess
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    DebuggerTimeout,
    EvalError,
    FrameLimitExceeded,
    MIGrammarError,
    NotStopped,
    ReplayMismatch,
    SessionDead,
    SpawnFailure,
    UnbreakableLine,
    UnexpectedStop,
    UnreachableLocation,
)
from .mi import MIRecord, parse_mi_line
from .scanner import LocationSet

DEFAULT_TIMEOUT = 30.0
DEFAULT_MAX_FRAMES = 2000


@dataclass(frozen=True)
class SourceLocation:
    """A stop position as reported by debug info."""

    file: str
    line: int
    function: str | None = None
    fullname: str | None = None  # absolute path on the build machine, if known

    def __post_init__(self) -> None:
        if self.line < 1:
            raise ValueError(f"line numbers start at 1, got {self.line}")

    def same_place(self, other: "SourceLocation") -> bool:
        return self.file == other.file and self.line == other.line


@dataclass(frozen=True)
class StackFrame:
    level: int
    function: str
    location: SourceLocation


@dataclass(frozen=True)
class StopEvent:
    location: SourceLocation
    reason: str


@dataclass
class Diagnostic:
    severity: str  # "warning" | "error"
    code: str
    message: str

    def format(self) -> str:
        return f"{self.severity}: [{self.code}] {self.message}"


# --- transports ----------------------------------------------------------


class LiveTransport:
    """Raw line I/O with a debugger subprocess, with timeouts.

    A reader thread drains stdout into a queue so a hung debuggee cannot
    wedge the build: every receive has a deadline.
    """

    _EOF = object()

    def __init__(self, argv: list[str], cwd: str | None = None) -> None:
        try:
            self._proc = subprocess.Popen(
                argv,
                cwd=cwd,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                encoding="utf-8",
                errors="replace",
                bufsize=1,
            )
        except OSError as exc:
            raise SpawnFailure(f"could not launch debugger {argv[0]!r}: {exc}") from exc
        self._queue: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._drain, daemon=True)
        self._reader.start()

    def _drain(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._queue.put(line.rstrip("\r\n"))
        self._queue.put(self._EOF)

    def send(self, text: str) -> None:
        if self._proc.poll() is not None or self._proc.stdin is None:
            raise SessionDead("debugger process has exited")
        try:
            self._proc.stdin.write(text + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise SessionDead(f"debugger pipe closed: {exc}") from exc

    def recv(self, timeout: float) -> str:
        try:
            item = self._queue.get(timeout=timeout)
        except queue.Empty:
            raise DebuggerTimeout(
                f"no debugger output within {timeout:.1f}s"
            ) from None
        if item is self._EOF:
            raise SessionDead("debugger closed its output stream")
        return item

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                if self._proc.stdin is not None:
                    self._proc.stdin.write("-gdb-exit\n")
                    self._proc.stdin.flush()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()


class ReplayTransport:
    """Serve a recorded transcript: sends are verified, receives replayed."""

    def __init__(self, entries: list[dict]) -> None:
        self._entries = entries
        self._pos = 0

    def send(self, text: str) -> None:
        entry = self._next("send")
        if entry["text"] != text:
            raise ReplayMismatch(
                f"transcript expected send {entry['text']!r}, session sent {text!r}"
            )

    def recv(self, timeout: float) -> str:
        entry = self._next("recv")
        return entry["text"]

    def _next(self, direction: str) -> dict:
        if self._pos >= len(self._entries):
            raise ReplayMismatch(
                f"transcript exhausted; session wanted another {direction}"
            )
        entry = self._entries[self._pos]
        if entry["direction"] != direction:
            raise ReplayMismatch(
                f"transcript has {entry['direction']!r} at position {self._pos}, "
                f"session wanted {direction!r}"
            )
        self._pos += 1
        return entry

    def close(self) -> None:
        pass


def load_transcript(path: str | Path) -> list[dict]:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                entries.append(json.loads(line))
    return entries


def save_transcript(entries: list[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry, ensure_ascii=False) + "\n")


# --- the session ---------------------------------------------------------


class DebuggerSession:
    """One debugger subprocess and its conversation state."""

    def __init__(self, transport, executable: str, timeout: float) -> None:
        self._transport = transport
        self.executable = executable
        self.timeout = timeout
        self.state = "not-started"  # not-started | stopped | exited | dead
        self.stop_location: SourceLocation | None = None
        self.exit_code: int | None = None
        self.mutation_epoch = 0
        self.transcript: list[dict] = []
        self.diagnostics: list[Diagnostic] = []
        # Compile-time source name -> absolute path, filled at startup.
        self.source_files: dict[str, str] = {}

    # -- raw protocol plumbing --

    def _recv_record(self, deadline: float) -> MIRecord:
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            self._die()
            raise DebuggerTimeout("operation deadline exceeded")
        try:
            line = self._transport.recv(remaining)
        except DebuggerTimeout:
            self._die()
            raise
        except SessionDead:
            self.state = "dead"
            raise
        self.transcript.append({"direction": "recv", "text": line})
        try:
            return parse_mi_line(line)
        except MIGrammarError:
            self._die()
            raise

    def _send(self, text: str) -> None:
        self.transcript.append({"direction": "send", "text": text})
        try:
            self._transport.send(text)
        except SessionDead:
            self.state = "dead"
            raise

    def _die(self) -> None:
        self.state = "dead"
        self._transport.close()

    def _require_alive(self) -> None:
        if self.state == "dead":
            raise SessionDead("session is dead")

    def _command(self, text: str) -> tuple[MIRecord, list[MIRecord]]:
        """Send one MI command; collect records until the prompt.

        Returns the result record plus everything else that arrived.
        """
        self._require_alive()
        self._send(text)
        deadline = time.monotonic() + self.timeout
        result: MIRecord | None = None
        extra: list[MIRecord] = []
        while True:
            rec = self._recv_record(deadline)
            if rec.kind == "prompt":
                break
            if rec.kind == "result":
                result = rec
            else:
                extra.append(rec)
        if result is None:
            self._die()
            raise UnexpectedStop(f"no result record for command {text!r}")
        return result, extra


    def _drain_banner(self) -> None:
        """Consume start-up output through the first prompt."""
        deadline = time.monotonic() + self.timeout
        while True:
            rec = self._recv_record(deadline)
            if rec.kind == "prompt":
                return

    def _wait_for_stop(self) -> MIRecord:
        """After ^running, wait for the *stopped notification and its prompt."""
        deadline = time.monotonic() + self.timeout
        stopped: MIRecord | None = None
        while True:
            rec = self._recv_record(deadline)
            if rec.kind == "exec-async" and rec.cls == "stopped":
                stopped = rec
            elif rec.kind == "prompt" and stopped is not None:
                return stopped

    # -- lifecycle --

    def close(self) -> None:
        if self.state != "dead":
            self.state = "dead"
        self._transport.close()

    def save_transcript(self, path: str | Path) -> None:
        save_transcript(self.transcript, path)

    # -- operations --

    def run_until(self, location: SourceLocation) -> StopEvent:
        self._require_alive()
        if self.state == "exited":
            raise UnreachableLocation(
                f"{location.file}:{location.line} is unreachable: the program "
                f"already exited with code {self.exit_code}",
                exit_code=self.exit_code,
            )
        number = self._insert_breakpoint(location, temporary=True)
        stopped = self._resume()
        reason = stopped.payload.get("reason", "")
        if reason == "breakpoint-hit":
            loc = _frame_location(stopped.payload.get("frame", {}))
            self.state = "stopped"
            self.stop_location = loc
            self.mutation_epoch += 1
            return StopEvent(location=loc, reason=reason)
        if reason in ("exited-normally", "exited"):
            code = _exit_code(stopped.payload)
            self.state = "exited"
            self.exit_code = code
            self._delete_breakpoints([number])
            raise UnreachableLocation(
                f"program exited with code {code} before reaching "
                f"{location.file}:{location.line}",
                exit_code=code,
            )
        self._die()
        raise UnexpectedStop(f"program stopped unexpectedly: {reason or 'no reason'}")

    def evaluate(self, expr: str) -> str:
        self._require_alive()
        if self.state != "stopped":
            raise NotStopped(
                f"cannot evaluate {expr!r}: the program is not stopped at a line"
            )
        result, _ = self._command(f"-data-evaluate-expression {_mi_quote(expr)}")
        if result.cls == "error":
            raise EvalError(
                f"evaluating {expr!r}: {result.payload.get('msg', 'unknown error')}"
            )
        return str(result.payload.get("value", ""))

    def list_frames(self) -> list[StackFrame]:
        self._require_alive()
        if self.state != "stopped":
            raise NotStopped("cannot list frames: the program is not stopped")
        result, _ = self._command("-stack-list-frames")
        if result.cls == "error":
            raise NotStopped(
                f"cannot list frames: {result.payload.get('msg', 'unknown error')}"
            )
        frames: list[StackFrame] = []
        for item in result.payload.get("stack", []):
            payload = item.get("frame", item) if isinstance(item, dict) else {}
            loc = _frame_location(payload)
            frames.append(
                StackFrame(
                    level=int(payload.get("level", len(frames))),
                    function=payload.get("func", "?"),
                    location=loc,
                )
            )
        for i, frame in enumerate(frames):
            if frame.level != i:
                raise UnexpectedStop(
                    f"stack listing has non-contiguous level {frame.level} at {i}"
                )
        return frames

    def step_with_filter(
        self,
        record_at: LocationSet,
        until: SourceLocation | None = None,
        max_frames: int = DEFAULT_MAX_FRAMES,
    ):
        """Yield a StopEvent per arrival at any record_at line, in order.

        A generator: the caller runs per-frame work between stops. Stops
        when `until` is reached (that event IS yielded), the program
        exits, or the frame limit trips (an error, so runaway traces are
        loud). Inserted breakpoints are removed on every exit path.
        """
        self._require_alive()
        if self.state == "exited":
            raise NotStopped("cannot step: the program already exited")
        lines = self._breakable_lines(record_at)
        numbers: list[str] = []
        covered: set[tuple[str, int]] = set()
        try:
            for file, line in lines:
                loc = SourceLocation(file=file, line=line)
                numbers.append(self._insert_breakpoint(loc, temporary=False))
                covered.add((file, line))
            if until is not None and (until.file, until.line) not in covered:
                numbers.append(self._insert_breakpoint(until, temporary=False))
            yielded = 0
            # The spot we are already stopped at counts as the first arrival.
            if self.state == "stopped" and self.stop_location is not None:
                loc = self.stop_location
                at_until = until is not None and loc.same_place(until)
                if record_at.covers(loc.file, loc.line) or at_until:
                    if max_frames < 1:
                        raise FrameLimitExceeded(
                            f"single-stepper exceeded {max_frames} recorded frames"
                        )
                    self.mutation_epoch += 1
                    yielded = 1
                    yield StopEvent(location=loc, reason="initial-stop")
                    if at_until:
                        return
            while True:
                stopped = self._resume()
                reason = stopped.payload.get("reason", "")
                if reason in ("exited-normally", "exited"):
                    self.state = "exited"
                    self.exit_code = _exit_code(stopped.payload)
                    return
                if reason != "breakpoint-hit":
                    self._die()
                    raise UnexpectedStop(
                        f"program stopped unexpectedly: {reason or 'no reason'}"
                    )
                loc = _frame_location(stopped.payload.get("frame", {}))
                self.state = "stopped"
                self.stop_location = loc
                at_until = until is not None and loc.same_place(until)
                recorded = record_at.covers(loc.file, loc.line)
                if not recorded and not at_until:
                    continue
                if yielded >= max_frames:
                    raise FrameLimitExceeded(
                        f"single-stepper exceeded {max_frames} recorded frames"
                    )
                self.mutation_epoch += 1
                yielded += 1
                yield StopEvent(location=loc, reason=reason)
                if at_until:
                    return
        finally:
            if self.state in ("stopped", "exited", "not-started") and numbers:
                self._delete_breakpoints(numbers)

    # -- helpers --

    def _insert_breakpoint(self, location: SourceLocation, temporary: bool) -> str:
        flag = "-t " if temporary else ""
        result, _ = self._command(
            f"-break-insert {flag}{location.file}:{location.line}"
        )
        if result.cls == "error":
            raise UnbreakableLine(
                f"cannot break at {location.file}:{location.line}: "
                f"{result.payload.get('msg', 'unknown error')}"
            )
        bkpt = result.payload.get("bkpt", {})
        number = str(bkpt.get("number", ""))
        reported = bkpt.get("line")
        if reported is not None and int(reported) != location.line:
            self._delete_breakpoints([number])
            raise UnbreakableLine(
                f"no code at {location.file}:{location.line} "
                f"(nearest breakable line is {reported})"
            )
        return number

    def _delete_breakpoints(self, numbers: list[str]) -> None:
        live = [n for n in numbers if n]
        if live:
            self._command(f"-break-delete {' '.join(live)}")

    def _resume(self) -> MIRecord:
        cmd = "-exec-run" if self.state == "not-started" else "-exec-continue"
        self.state = "running"
        result, extras = self._command(cmd)
        if result.cls == "error":
            msg = result.payload.get("msg", "unknown debugger error")
            self._die()
            raise UnexpectedStop(f"could not resume the program: {msg}")
        # The stop usually arrives after the post-^running prompt, but a
        # fast exit can land it before; don't wait for it twice.
        for rec in extras:
            if rec.kind == "exec-async" and rec.cls == "stopped":
                return rec
        return self._wait_for_stop()

    def _breakable_lines(self, record_at: LocationSet) -> list[tuple[str, int]]:
        """Resolve a LocationSet against the line table, preserving order."""
        table: dict[str, list[int]] = {}
        for file in record_at.files():
            result, _ = self._command(f"-symbol-list-lines {file}")
            if result.cls == "error":
                self.diagnostics.append(
                    Diagnostic(
                        severity="warning",
                        code="NoSuchSourceFile",
                        message=(
                            f"{file}: "
                            f"{result.payload.get('msg', 'no line table')}"
                        ),
                    )
                )
                table[file] = []
                continue
            seen: set[int] = set()
            for entry in result.payload.get("lines", []):
                line = int(entry.get("line", "0"))
                if line >= 1:
                    seen.add(line)
            table[file] = sorted(seen)
        out: list[tuple[str, int]] = []
        emitted: set[tuple[str, int]] = set()
        for entry in record_at.entries:
            for line in table.get(entry.file, []):
                if entry.covers(entry.file, line) and (entry.file, line) not in emitted:
                    emitted.add((entry.file, line))
                    out.append((entry.file, line))
        return out


def _mi_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _frame_location(frame: dict) -> SourceLocation:
    file = frame.get("file")
    line = frame.get("line")
    if not file or not line:
        raise UnexpectedStop(
            f"stop frame carries no source location "
            f"(function {frame.get('func', '?')}); was the program built "
            f"with debug info (-O0 -ggdb3)?"
        )
    return SourceLocation(
        file=file,
        line=int(line),
        function=frame.get("func"),
        fullname=frame.get("fullname"),
    )


def _exit_code(payload: dict) -> int:
    if payload.get("reason") == "exited-normally":
        return 0
    text = payload.get("exit-code", "0")
    return int(text, 8)  # MI reports exit codes in octal


def start_session(
    executable: str,
    gdb_path: str = "gdb",
    timeout: float = DEFAULT_TIMEOUT,
    cwd: str | Path | None = None,
    transport=None,
) -> DebuggerSession:
    """Launch (or replay) a debugger and load the executable's symbols.

    ``executable`` may be relative; it is resolved against ``cwd``, and the
    relative form is what goes over the wire so transcripts stay portable.
    """
    if transport is None:
        resolved = Path(cwd or ".") / executable
        if not resolved.exists():
            raise SpawnFailure(f"executable not found: {resolved}")
        transport = LiveTransport(
            [gdb_path, "--interpreter=mi2", "-nx", "-q"],
            cwd=str(cwd) if cwd is not None else None,
        )
    session = DebuggerSession(transport, executable=executable, timeout=timeout)
    try:
        session._drain_banner()
        session._command("-gdb-set confirm off")
        # Keep the debuggee's own stdout off the protocol channel.
        session._command("-inferior-tty-set /dev/null")
        result, _ = session._command(f"-file-exec-and-symbols {executable}")
        if result.cls == "error":
            msg = result.payload.get("msg", "unknown error")
            session.close()
            raise SpawnFailure(f"could not load {executable!r}: {msg}")
        files, _ = session._command("-file-list-exec-source-files")
        for entry in files.payload.get("files") or []:
            if isinstance(entry, dict) and "file" in entry:
                session.source_files.setdefault(
                    entry["file"], entry.get("fullname", entry["file"])
                )
        if not files.payload.get("files"):
            session.diagnostics.append(
                Diagnostic(
                    severity="warning",
                    code="NoDebugInfo",
                    message=(
                        f"{executable} carries no source-level debug info; "
                        "compile with -O0 -ggdb3"
                    ),
                )
            )
    except Exception:
        transport.close()
        raise
    return session
