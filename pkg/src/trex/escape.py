"""Output-format text escaping shared by fragment and graph emitters."""

from __future__ import annotations

import html

_TEX_SPECIALS = {
    "\\": r"\textbackslash{}",
    "{": r"\{",
    "}": r"\}",
    "$": r"\$",
    "&": r"\&",
    "#": r"\#",
    "^": r"\textasciicircum{}",
    "_": r"\_",
    "%": r"\%",
    "~": r"\textasciitilde{}",
}


def escape_html(text: str) -> str:
    return html.escape(text, quote=True)


def escape_tex(text: str) -> str:
    return "".join(_TEX_SPECIALS.get(ch, ch) for ch in text)
