"""Output assembly: HTML splicing, LaTeX fragment files, stepper data.

The HTML path splices each command's fragment into the document at the
command's exact source span; everything else passes through byte-for-
byte (modulo collapsed escapes). The LaTeX path writes one fragment
file per recorded command occurrence plus a state file, state last, so
a reader that sees the state file sees complete fragments.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
from importlib import resources
from pathlib import Path
from typing import Any

from .cache import ENGINE_VERSION
from .engine import CommandResult
from .errors import MissingFragment
from .scanner import Passthrough

STATE_FILE_NAME = "trexout.state"
FRAGMENT_PREFIX = "trex-frag-"


def load_asset(name: str) -> str:
    return (resources.files("trex") / "assets" / name).read_text(encoding="utf-8")


def _style_block() -> str:
    return f'<style class="trex-style">\n{load_asset("style.css")}</style>\n'


def _script_block(script: str) -> str:
    return f'<script class="trex-stepper-widget">\n{script}</script>\n'


def emit_html(
    items: list[Passthrough | CommandResult],
    *,
    widget_script: str | None = None,
) -> str:
    """The finished HTML document for an executed stream.

    Raises MissingFragment when a command produced no HTML fragment.
    The shared style block is injected once; the stepper widget script
    is injected once, and only when the document contains a stepper.
    """
    parts: list[str] = []
    has_stepper = False
    for item in items:
        if isinstance(item, Passthrough):
            parts.append(item.rendered)
            continue
        fragment = item.fragments.get("html")
        if fragment is None:
            name = item.call.name if item.call else "(unknown)"
            raise MissingFragment(
                f"\\{name} produced no HTML fragment",
                span=item.call.span if item.call else None,
            )
        parts.append(fragment)
        if item.frame_sequence is not None:
            has_stepper = True
    body = "".join(parts)
    tail = _style_block()
    if has_stepper:
        script = widget_script if widget_script is not None else load_asset("stepper.js")
        tail += _script_block(script)
    # Keep injected blocks inside <body> when the document has one.
    close = re.search(r"</body\s*>", body, flags=re.IGNORECASE)
    if close:
        return body[: close.start()] + tail + body[close.start():]
    return body + tail


def atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_latex_fragments(
    items: list[Passthrough | CommandResult],
    out_dir: str | Path,
    *,
    diagnostics: list[str] | None = None,
) -> list[Path]:
    """Write trex-frag-<index>.tex per command, then the state file.

    <index> is the command's aux-log index (its position among recorded
    occurrences). The state file is written last and names every
    fragment, so its presence certifies a complete set.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = [item for item in items if isinstance(item, CommandResult)]
    written: list[Path] = []
    for fallback_index, result in enumerate(results):
        fragment = result.fragments.get("tex")
        if fragment is None:
            name = result.call.name if result.call else "(unknown)"
            raise MissingFragment(
                f"\\{name} produced no TeX fragment",
                span=result.call.span if result.call else None,
            )
        index = fallback_index
        if result.call is not None and result.call.aux_index is not None:
            index = result.call.aux_index
        path = out / f"{FRAGMENT_PREFIX}{index}.tex"
        atomic_write(path, fragment)
        written.append(path)
    state = {
        "version": ENGINE_VERSION,
        "fragments": [p.name for p in written],
        "diagnostics": list(diagnostics or []),
    }
    state_path = out / STATE_FILE_NAME
    atomic_write(state_path, json.dumps(state, indent=2, sort_keys=True) + "\n")
    written.append(state_path)
    return written


def emit_stepper_data(seq: Any) -> dict:
    """The stepper's wire format: what the playback widget consumes."""
    return {
        "version": 1,
        "source_windows": [
            {
                "file": window.file,
                "first_line": window.first_line,
                "lines": list(window.lines),
            }
            for window in seq.source_windows
        ],
        "frames": [
            {
                "index": frame.index,
                "file": frame.location.file,
                "line": frame.location.line,
                "html": frame.fragments.get("html", ""),
            }
            for frame in seq.frames
        ],
    }


def stepper_data_json(seq: Any) -> str:
    """JSON payload safe to inline inside a <script> element."""
    text = json.dumps(emit_stepper_data(seq), ensure_ascii=False, sort_keys=True)
    return text.replace("</", "<\\/")
