"""Helpers shared across test modules: markup stripping and doc running.

The strippers reduce an HTML or TeX fragment to its visible text so
tests can assert the two output paths agree. They are tuned to the
constructs the compiler actually emits (tables, listings, stepper
filmstrips), not to arbitrary markup.
"""

from __future__ import annotations

import html as html_lib
import re
from pathlib import Path

FIXTURES = Path(__file__).parent / "fixtures"

# --- HTML -> visible text --------------------------------------------------

_SCRIPT_RE = re.compile(r"<(script|style)\b.*?</\1\s*>", re.DOTALL | re.IGNORECASE)
_TAG_RE = re.compile(r"<[^>]+>")


def strip_html(text: str) -> str:
    text = _SCRIPT_RE.sub(" ", text)
    text = _TAG_RE.sub(" ", text)
    return html_lib.unescape(text)


# --- TeX -> visible text ---------------------------------------------------

_TEX_ESCAPES = {
    "\\textbackslash{}": "\\",
    "\\textasciicircum{}": "^",
    "\\textasciitilde{}": "~",
    "\\{": "{",
    "\\}": "}",
    "\\$": "$",
    "\\&": "&",
    "\\#": "#",
    "\\_": "_",
    "\\%": "%",
}


_VERBATIM_RE = re.compile(
    r"\\begin\{lstlisting\}(?:\[[^\]]*\])?\n(.*?)\n\\end\{lstlisting\}", re.DOTALL
)


def strip_tex(text: str) -> str:
    # Verbatim environments keep their content untouched.
    verbatim: dict[str, str] = {}

    def stash(match: re.Match) -> str:
        token = f"\x01{len(verbatim)}\x01"
        verbatim[token] = match.group(1)
        return token

    text = _VERBATIM_RE.sub(stash, text)
    out_lines = []
    for line in text.splitlines():
        if re.match(r"\s*\\(begin|end)\{", line):
            continue
        out_lines.append(line)
    text = "\n".join(out_lines)
    # Protect escaped specials before stripping structural tokens.
    placeholder = {}
    for i, (escaped, plain) in enumerate(_TEX_ESCAPES.items()):
        token = f"\x00{i}\x00"
        placeholder[token] = plain
        text = text.replace(escaped, token)
    # Break alignment/newline tokens before dropping command names.
    text = text.replace("\\\\", " ").replace("&", " ")
    for marker in ("\\hline", "\\par", "\\noindent"):
        text = text.replace(marker, " ")
    # \texttt{...} etc: drop the command, keep the braced content.
    text = re.sub(r"\\[A-Za-z]+\s*", " ", text)
    text = text.replace("{", " ").replace("}", " ")
    for token, plain in placeholder.items():
        text = text.replace(token, plain)
    for token, body in verbatim.items():
        text = text.replace(token, body)
    return text


def norm_ws(text: str) -> str:
    return " ".join(text.split())


def visible_html(text: str) -> str:
    return norm_ws(strip_html(text))


def visible_tex(text: str) -> str:
    return norm_ws(strip_tex(text))
