"""Parser for the GDB machine-interface (MI) text protocol.

One call parses one complete line from the debugger's MI channel into an
:class:`MIRecord`. The grammar, in brief::

    [token] '^' result-class  (',' var '=' value)*     result
    [token] '*' async-class   (',' var '=' value)*     exec-async
    [token] '=' async-class   (',' var '=' value)*     notify-async
    [token] '+' async-class   (',' var '=' value)*     status-async
    '~' c-string                                       console-stream
    '@' c-string                                       target-stream
    '&' c-string                                       log-stream
    '(gdb)'                                            prompt sentinel

Values are c-strings, ``{...}`` tuples (dicts here), or ``[...]`` lists.
C-string escapes are fully resolved, so payload strings are plain text.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from .errors import MIGrammarError

MIValue = Union[str, dict, list]

RESULT_CLASSES = frozenset({"done", "running", "connected", "error", "exit"})

_KIND_BY_PREFIX = {
    "^": "result",
    "*": "exec-async",
    "=": "notify-async",
    "+": "status-async",
    "~": "console-stream",
    "@": "target-stream",
    "&": "log-stream",
}

_SIMPLE_ESCAPES = {
    "n": "\n",
    "t": "\t",
    "r": "\r",
    "a": "\a",
    "b": "\b",
    "f": "\f",
    "v": "\v",
    '"': '"',
    "'": "'",
    "\\": "\\",
}


@dataclass(frozen=True)
class MIRecord:
    """One parsed MI output record."""

    kind: str
    cls: str = ""
    payload: dict = field(default_factory=dict)
    token: int | None = None

    def get(self, key: str, default: MIValue | None = None) -> MIValue | None:
        return self.payload.get(key, default)


class _Cursor:
    __slots__ = ("text", "pos")

    def __init__(self, text: str) -> None:
        self.text = text
        self.pos = 0

    def at_end(self) -> bool:
        return self.pos >= len(self.text)

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def fail(self, what: str) -> MIGrammarError:
        return MIGrammarError(
            f"{what} at offset {self.pos} in MI line {self.text!r}",
            offset=self.pos,
        )

    def expect(self, ch: str) -> None:
        if self.peek() != ch:
            raise self.fail(f"expected {ch!r}")
        self.pos += 1


def _parse_c_string(cur: _Cursor) -> str:
    cur.expect('"')
    out: list[str] = []
    text = cur.text
    i = cur.pos
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == '"':
            cur.pos = i + 1
            return "".join(out)
        if ch != "\\":
            out.append(ch)
            i += 1
            continue
        i += 1
        if i >= n:
            break
        esc = text[i]
        if esc in _SIMPLE_ESCAPES:
            out.append(_SIMPLE_ESCAPES[esc])
            i += 1
        elif esc in "01234567":
            digits = esc
            i += 1
            while i < n and len(digits) < 3 and text[i] in "01234567":
                digits += text[i]
                i += 1
            out.append(chr(int(digits, 8)))
        elif esc == "x":
            i += 1
            digits = ""
            while i < n and len(digits) < 2 and text[i] in "0123456789abcdefABCDEF":
                digits += text[i]
                i += 1
            if not digits:
                cur.pos = i
                raise cur.fail("empty \\x escape")
            out.append(chr(int(digits, 16)))
        else:
            # Unknown escape: keep the character, matching debugger behavior.
            out.append(esc)
            i += 1
    cur.pos = i
    raise cur.fail("unterminated string")


def _parse_name(cur: _Cursor) -> str:
    start = cur.pos
    text = cur.text
    i = start
    while i < len(text) and (text[i].isalnum() or text[i] in "_-"):
        i += 1
    if i == start:
        raise cur.fail("expected a name")
    cur.pos = i
    return text[start:i]


def _parse_value(cur: _Cursor) -> MIValue:
    ch = cur.peek()
    if ch == '"':
        return _parse_c_string(cur)
    if ch == "{":
        cur.pos += 1
        result: dict = {}
        if cur.peek() == "}":
            cur.pos += 1
            return result
        while True:
            name = _parse_name(cur)
            cur.expect("=")
            result[name] = _parse_value(cur)
            if cur.peek() == ",":
                cur.pos += 1
                continue
            cur.expect("}")
            return result
    if ch == "[":
        cur.pos += 1
        items: list = []
        if cur.peek() == "]":
            cur.pos += 1
            return items
        while True:
            if cur.peek() in '"{[':
                items.append(_parse_value(cur))
            else:
                # List of var=value results; keep each as a one-entry dict.
                name = _parse_name(cur)
                cur.expect("=")
                items.append({name: _parse_value(cur)})
            if cur.peek() == ",":
                cur.pos += 1
                continue
            cur.expect("]")
            return items
    raise cur.fail("expected a value")


def _parse_results(cur: _Cursor) -> dict:
    payload: dict = {}
    while cur.peek() == ",":
        cur.pos += 1
        name = _parse_name(cur)
        cur.expect("=")
        payload[name] = _parse_value(cur)
    if not cur.at_end():
        raise cur.fail("trailing junk")
    return payload


def parse_mi_line(text: str) -> MIRecord:
    """Parse one raw MI output line (trailing newline tolerated)."""
    line = text.rstrip("\r\n")
    if line.rstrip() == "(gdb)":
        return MIRecord(kind="prompt")
    cur = _Cursor(line)

    token: int | None = None
    start = cur.pos
    while not cur.at_end() and "0" <= cur.peek() <= "9":
        cur.pos += 1
    if cur.pos > start:
        token = int(line[start:cur.pos])

    prefix = cur.peek()
    kind = _KIND_BY_PREFIX.get(prefix)
    if kind is None:
        raise cur.fail("unrecognized record prefix")
    cur.pos += 1

    if kind in ("console-stream", "target-stream", "log-stream"):
        if token is not None:
            raise cur.fail("stream records take no token")
        content = _parse_c_string(cur)
        if not cur.at_end():
            raise cur.fail("trailing junk")
        return MIRecord(kind=kind, payload={"text": content})

    cls = _parse_name(cur)
    if kind == "result" and cls not in RESULT_CLASSES:
        raise MIGrammarError(
            f"unknown result class {cls!r} in MI line {line!r}", offset=1
        )
    payload = _parse_results(cur)
    return MIRecord(kind=kind, cls=cls, payload=payload, token=token)
