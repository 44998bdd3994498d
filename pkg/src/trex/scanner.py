"""Document scanner: TeX-style embedded commands, location specs, aux logs.

The scanner is a single-pass, text-level tokenizer. It knows nothing about
HTML structure or TeX macro expansion: a command is a backslash followed by
a known name, one optional ``[k=v,...]`` group, a fixed number of ``{...}``
argument groups and, for body-taking commands, one trailing ``{...}`` block.
Everything else is passthrough.
"""

from __future__ import annotations

import base64
import binascii
import re
from dataclasses import dataclass, field

from .errors import (
    EmptySpec,
    MalformedAuxLine,
    MalformedOptions,
    MalformedRange,
    MissingArgument,
    NonContiguousIndices,
    UnbalancedBraces,
    UnknownCommand,
)

_NAME_RE = re.compile(r"[A-Za-z][A-Za-z0-9]*")

AUX_LINE_PREFIX = "!trex!"


@dataclass(frozen=True)
class CommandSpec:
    """Scanner-facing shape of one recognized command."""

    arity: int
    takes_body: bool = False


@dataclass
class Passthrough:
    """A run of document text the compiler copies through.

    ``source`` is the exact input slice; ``rendered`` differs only where a
    ``\\\\name`` escape collapsed to ``\\name``.
    """

    source: str
    rendered: str
    span: tuple[int, int]


@dataclass
class CommandCall:
    """One parsed embedded command."""

    name: str
    options: dict[str, str] = field(default_factory=dict)
    args: list[str] = field(default_factory=list)
    body: str | None = None
    span: tuple[int, int] = (0, 0)
    # Set for calls recovered from an aux log: position in the log.
    aux_index: int | None = None


@dataclass
class DocumentStream:
    items: list[Passthrough | CommandCall]
    dialect: str  # "html" | "latex-aux"
    source: str

    def calls(self) -> list[CommandCall]:
        return [item for item in self.items if isinstance(item, CommandCall)]

    def round_trip(self) -> str:
        """Reassemble the input from item spans; used to check scanner fidelity."""
        return "".join(self.source[item.span[0]:item.span[1]] for item in self.items)


def _skip_ws(text: str, pos: int) -> int:
    while pos < len(text) and text[pos] in " \t\r\n":
        pos += 1
    return pos


def _read_group(text: str, pos: int, cmd_name: str, cmd_start: int) -> tuple[str, int]:
    """Read one balanced ``{...}`` group starting at ``pos`` (which must be '{').

    Returns the group contents (without outer braces) and the position just
    past the closing brace.
    """
    assert text[pos] == "{"
    depth = 0
    start = pos
    i = pos
    while i < len(text):
        ch = text[i]
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start + 1:i], i + 1
        i += 1
    raise UnbalancedBraces(
        f"unclosed '{{' in argument of \\{cmd_name}",
        span=(cmd_start, len(text)),
    )


def _parse_options(text: str, pos: int, cmd_name: str, cmd_start: int) -> tuple[dict[str, str], int]:
    """Parse an ``[k=v,k2="v,v"]`` option group starting at '['."""
    assert text[pos] == "["
    options: dict[str, str] = {}
    i = pos + 1
    while True:
        i = _skip_ws(text, i)
        if i >= len(text):
            raise UnbalancedBraces(
                f"unclosed '[' in options of \\{cmd_name}", span=(cmd_start, len(text))
            )
        if text[i] == "]":
            return options, i + 1
        m = _NAME_RE.match(text, i)
        if not m:
            raise MalformedOptions(
                f"expected option key in \\{cmd_name} options, found {text[i]!r}",
                span=(cmd_start, i + 1),
            )
        key = m.group(0)
        i = _skip_ws(text, m.end())
        if i >= len(text) or text[i] != "=":
            raise MalformedOptions(
                f"option {key!r} of \\{cmd_name} is missing '='",
                span=(cmd_start, i if i < len(text) else len(text)),
            )
        i = _skip_ws(text, i + 1)
        if i < len(text) and text[i] == '"':
            # Quoted value: commas and ']' allowed, \" and \\ are escapes.
            value_chars = []
            i += 1
            while True:
                if i >= len(text):
                    raise MalformedOptions(
                        f"unterminated quoted value for option {key!r} of \\{cmd_name}",
                        span=(cmd_start, len(text)),
                    )
                ch = text[i]
                if ch == "\\" and i + 1 < len(text) and text[i + 1] in '"\\':
                    value_chars.append(text[i + 1])
                    i += 2
                    continue
                if ch == '"':
                    i += 1
                    break
                value_chars.append(ch)
                i += 1
            value = "".join(value_chars)
        else:
            end = i
            while end < len(text) and text[end] not in ",]":
                end += 1
            if end >= len(text):
                raise UnbalancedBraces(
                    f"unclosed '[' in options of \\{cmd_name}",
                    span=(cmd_start, len(text)),
                )
            value = text[i:end].strip()
            i = end
        if key in options:
            raise MalformedOptions(
                f"duplicate option {key!r} in \\{cmd_name}", span=(cmd_start, i)
            )
        options[key] = value
        i = _skip_ws(text, i)
        if i < len(text) and text[i] == ",":
            i += 1


def scan_document(
    text: str,
    dialect: str,
    command_table: dict[str, CommandSpec],
    *,
    strict: bool = False,
) -> DocumentStream:
    """Split a document into passthrough runs and command calls.

    ``command_table`` must list every recognized command. Backslash
    sequences not in the table pass through untouched (or raise
    UnknownCommand under ``strict``). ``\\\\name`` for a known name is an
    escape rendering a literal ``\\name``.
    """
    items: list[Passthrough | CommandCall] = []
    run_start = 0  # where the current passthrough run began
    copied_upto = 0  # source already appended to rendered_parts
    rendered_parts: list[str] = []
    pos = 0

    def flush(end: int) -> None:
        nonlocal run_start, copied_upto
        if end > copied_upto:
            rendered_parts.append(text[copied_upto:end])
        if end > run_start:
            items.append(
                Passthrough(
                    source=text[run_start:end],
                    rendered="".join(rendered_parts),
                    span=(run_start, end),
                )
            )
        rendered_parts.clear()
        run_start = end
        copied_upto = end

    while pos < len(text):
        bs = text.find("\\", pos)
        if bs == -1:
            break
        # Escape: in the HTML dialect, \\name for a known name renders \name.
        if dialect == "html" and text.startswith("\\\\", bs):
            m = _NAME_RE.match(text, bs + 2)
            if m and m.group(0) in command_table:
                if bs > copied_upto:
                    rendered_parts.append(text[copied_upto:bs])
                rendered_parts.append("\\" + m.group(0))
                copied_upto = m.end()
                pos = m.end()
            else:
                pos = bs + 2
            continue
        m = _NAME_RE.match(text, bs + 1)
        if not m:
            pos = bs + 1
            continue
        name = m.group(0)
        spec = command_table.get(name)
        if spec is None:
            if strict:
                raise UnknownCommand(f"unknown command \\{name}", span=(bs, m.end()))
            pos = m.end()
            continue

        flush(bs)

        # Options must follow the name immediately; whitespace is allowed
        # between groups but never consumed after the last one.
        i = m.end()
        options: dict[str, str] = {}
        if i < len(text) and text[i] == "[":
            options, i = _parse_options(text, i, name, bs)
        args: list[str] = []
        group_count = spec.arity + (1 if spec.takes_body else 0)
        for _ in range(group_count):
            probe = _skip_ws(text, i)
            if probe >= len(text) or text[probe] != "{":
                raise MissingArgument(
                    f"\\{name} expects {spec.arity} argument group(s)"
                    + (" plus a body block" if spec.takes_body else ""),
                    span=(bs, min(probe + 1, len(text))),
                )
            group, i = _read_group(text, probe, name, bs)
            args.append(group)
        body = args.pop() if spec.takes_body else None
        call = CommandCall(name=name, options=options, args=args, body=body, span=(bs, i))
        items.append(call)
        run_start = i
        copied_upto = i
        pos = i

    flush(len(text))
    return DocumentStream(items=items, dialect=dialect, source=text)


# --- location specifications -------------------------------------------


def _ascii_digits(text: str) -> bool:
    """True for non-empty, pure 0-9 text. str.isdigit also accepts Unicode
    digits that int() rejects, such as superscripts."""
    return bool(text) and all("0" <= ch <= "9" for ch in text)


@dataclass(frozen=True)
class LocationEntry:
    """One file plus either all its lines (``lines is None``) or an
    inclusive range."""

    file: str
    lines: tuple[int, int] | None = None

    def covers(self, file: str, line: int) -> bool:
        if self.file != file:
            return False
        if self.lines is None:
            return True
        return self.lines[0] <= line <= self.lines[1]


@dataclass(frozen=True)
class LocationSet:
    entries: tuple[LocationEntry, ...]

    def covers(self, file: str, line: int) -> bool:
        return any(e.covers(file, line) for e in self.entries)

    def files(self) -> list[str]:
        seen: list[str] = []
        for e in self.entries:
            if e.file not in seen:
                seen.append(e.file)
        return seen


def parse_location_spec(text: str) -> LocationSet:
    """Parse ``file``, ``file:N`` and ``file:A-B`` entries, comma-separated."""
    if not text.strip():
        raise EmptySpec("empty location specification")
    entries = []
    for raw in text.split(","):
        part = raw.strip()
        if not part:
            raise MalformedRange(f"empty entry in location spec {text!r}")
        if ":" not in part:
            entries.append(LocationEntry(file=part))
            continue
        file, _, linespec = part.rpartition(":")
        if not file:
            raise MalformedRange(f"missing file name in {part!r}")
        if "-" in linespec:
            lo_text, _, hi_text = linespec.partition("-")
            if not _ascii_digits(lo_text) or not _ascii_digits(hi_text):
                raise MalformedRange(f"non-numeric range in {part!r}")
            lo, hi = int(lo_text), int(hi_text)
            if lo < 1 or lo > hi:
                raise MalformedRange(f"bad range {lo}-{hi} in {part!r}")
            entries.append(LocationEntry(file=file, lines=(lo, hi)))
        else:
            if not _ascii_digits(linespec):
                raise MalformedRange(f"non-numeric line in {part!r}")
            line = int(linespec)
            if line < 1:
                raise MalformedRange(f"line numbers start at 1, got {part!r}")
            entries.append(LocationEntry(file=file, lines=(line, line)))
    return LocationSet(entries=tuple(entries))


def format_location_spec(locs: LocationSet) -> str:
    """Inverse of :func:`parse_location_spec` on valid sets."""
    parts = []
    for e in locs.entries:
        if e.lines is None:
            parts.append(e.file)
        elif e.lines[0] == e.lines[1]:
            parts.append(f"{e.file}:{e.lines[0]}")
        else:
            parts.append(f"{e.file}:{e.lines[0]}-{e.lines[1]}")
    return ",".join(parts)


# --- LaTeX aux log -------------------------------------------------------


def format_aux_line(index: int, command_source: str) -> str:
    """Encode one command occurrence the way the LaTeX style file does."""
    payload = base64.b64encode(command_source.encode("utf-8")).decode("ascii")
    return f"{AUX_LINE_PREFIX}{index}!{payload}"


def parse_aux_log(
    text: str, command_table: dict[str, CommandSpec], *, strict: bool = False
) -> list[CommandCall]:
    """Decode an aux log into command calls, in document order.

    Each line is ``!trex!<index>!<base64 of UTF-8 command source>``. Indices
    must run 0..n-1. Every decoded source must contain exactly one command.
    """
    calls: list[CommandCall] = []
    expected = 0
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if not line.startswith(AUX_LINE_PREFIX):
            raise MalformedAuxLine(
                f"line {line_no}: not an aux-log line", line_no=line_no
            )
        rest = line[len(AUX_LINE_PREFIX):]
        index_text, sep, payload = rest.partition("!")
        if not sep or not _ascii_digits(index_text):
            raise MalformedAuxLine(
                f"line {line_no}: malformed index field", line_no=line_no
            )
        index = int(index_text)
        if index != expected:
            raise NonContiguousIndices(
                f"line {line_no}: expected index {expected}, found {index}",
                line_no=line_no,
            )
        expected += 1
        try:
            source = base64.b64decode(payload, validate=True).decode("utf-8")
        except (binascii.Error, UnicodeDecodeError) as exc:
            raise MalformedAuxLine(
                f"line {line_no}: bad payload ({exc})", line_no=line_no
            ) from exc
        stream = scan_document(source, "latex-aux", command_table, strict=strict)
        cmds = stream.calls()
        if len(cmds) != 1:
            raise MalformedAuxLine(
                f"line {line_no}: expected exactly one command, found {len(cmds)}",
                line_no=line_no,
            )
        stray = "".join(
            item.source for item in stream.items if isinstance(item, Passthrough)
        )
        if stray.strip():
            raise MalformedAuxLine(
                f"line {line_no}: unexpected text around command: {stray.strip()!r}",
                line_no=line_no,
            )
        call = cmds[0]
        call.aux_index = index
        calls.append(call)
    return calls
