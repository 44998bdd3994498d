"""The built-in command set.

Modules (all pre-imported into every engine):
  Core          setExecutable, runUntil, trexInitialize, uncache
  GDBEval       gdbEvalInt
  Print         printCode, printCallStack, printExpressionTable
  SingleStepper singleStepper

Every fragment-producing command fills both the "html" and "tex"
fragments, and stripping markup from either yields the same visible
text. Snippet commands reproduce source lines byte-for-byte.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path

from . import render
from .engine import (
    CommandDescriptor,
    CommandResult,
    EngineState,
    execute_call,
    handle_trex_initialize,
    handle_uncache,
)
from .errors import (
    EvalError,
    FrameLimitExceeded,
    MalformedArgument,
    NonIntegerValue,
    RangeOutOfBounds,
    SourceFileNotFound,
    SpawnFailure,
    TrexError,
)
from .escape import escape_html, escape_tex
from .scanner import (
    CommandCall,
    CommandSpec,
    LocationSet,
    Passthrough,
    parse_location_spec,
    scan_document,
)
from .session import SourceLocation, start_session

DEFAULT_TEX_FRAME_CAP = 8
_INT_RE = re.compile(r"[+-]?[0-9]+")


# --- shared data shapes ----------------------------------------------------


@dataclass
class CodeSnippet:
    """A contiguous run of source lines, 1-based and inclusive."""

    file: str
    first_line: int
    lines: list[str]

    @property
    def last_line(self) -> int:
        return self.first_line + len(self.lines) - 1

    def covers(self, file: str, line: int) -> bool:
        return file == self.file and self.first_line <= line <= self.last_line


@dataclass
class StepperFrame:
    """One recorded stop: where, plus the body rendered at that stop."""

    index: int
    location: SourceLocation
    fragments: dict[str, str]


@dataclass
class FrameSequence:
    """Everything a stepper recorded: frames plus their source context."""

    frames: list[StepperFrame] = field(default_factory=list)
    source_windows: list[CodeSnippet] = field(default_factory=list)
    stepper_id: str = "trex-stepper-0"


# --- small helpers ---------------------------------------------------------


def _single_line_location(text: str, command: str) -> SourceLocation:
    locs = parse_location_spec(text)
    if len(locs.entries) != 1:
        raise MalformedArgument(
            f"{command} expects exactly one file:line location, got {text!r}"
        )
    entry = locs.entries[0]
    if entry.lines is None or entry.lines[0] != entry.lines[1]:
        raise MalformedArgument(
            f"{command} expects exactly one file:line location, got {text!r}"
        )
    return SourceLocation(file=entry.file, line=entry.lines[0])


def _resolve_source(state: EngineState, file: str) -> Path:
    """Find a location-spec file name on disk.

    Tries, in order: an absolute path as given, the debuggee's own
    source-file table (exact name, then matching suffix), and finally
    the document directory.
    """
    candidate = Path(file)
    if candidate.is_absolute():
        if candidate.is_file():
            return candidate
        raise SourceFileNotFound(f"source file {file!r} not found")
    mapped = state.source_files.get(file)
    if mapped and Path(mapped).is_file():
        return Path(mapped)
    for name, full in state.source_files.items():
        if (name == file or name.endswith("/" + file)) and Path(full).is_file():
            return Path(full)
    local = state.doc_dir / file
    if local.is_file():
        return local
    raise SourceFileNotFound(f"source file {file!r} not found")


def _read_lines(path: Path, file: str) -> list[str]:
    try:
        return path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise SourceFileNotFound(f"source file {file!r} unreadable: {exc}")


def _snippet(state: EngineState, file: str, lines: tuple[int, int] | None) -> CodeSnippet:
    path = _resolve_source(state, file)
    all_lines = _read_lines(path, file)
    if lines is None:
        first, last = 1, len(all_lines)
    else:
        first, last = lines
        if last > len(all_lines):
            raise RangeOutOfBounds(
                f"{file} has {len(all_lines)} lines; requested {first}-{last}"
            )
    return CodeSnippet(file=file, first_line=first, lines=all_lines[first - 1:last])


def _snippet_html(snippet: CodeSnippet, highlight: int | None = None) -> str:
    rows = []
    for offset, text in enumerate(snippet.lines):
        line_no = snippet.first_line + offset
        classes = "trex-line"
        if highlight is not None and line_no == highlight:
            classes += " trex-current-line"
        rows.append(
            f'<span class="{classes}" data-line="{line_no}">'
            f"{escape_html(text)}</span>"
        )
    body = "\n".join(rows)
    return (
        f'<pre class="trex-code" data-file="{escape_html(snippet.file)}" '
        f'data-first-line="{snippet.first_line}">{body}</pre>'
    )


def _snippet_tex(snippet: CodeSnippet) -> str:
    body = "\n".join(snippet.lines)
    return (
        f"\\begin{{lstlisting}}[firstnumber={snippet.first_line}]\n"
        f"{body}\n"
        f"\\end{{lstlisting}}"
    )


def _table_html(css: str, headers: list[str], rows: list[list[tuple[str, bool]]]) -> str:
    head = "".join(f"<th>{escape_html(h)}</th>" for h in headers)
    body_rows = []
    for row in rows:
        cells = []
        for text, is_error in row:
            cls = ' class="trex-error"' if is_error else ""
            cells.append(f"<td{cls}>{escape_html(text)}</td>")
        body_rows.append("<tr>" + "".join(cells) + "</tr>")
    return (
        f'<table class="trex-table {css}">'
        f"<thead><tr>{head}</tr></thead>"
        f"<tbody>{''.join(body_rows)}</tbody></table>"
    )


def _table_tex(spec: str, headers: list[str], rows: list[list[tuple[str, bool]]]) -> str:
    lines = [f"\\begin{{tabular}}{{{spec}}}"]
    lines.append(" & ".join(escape_tex(h) for h in headers) + " \\\\")
    lines.append("\\hline")
    for row in rows:
        cells = [
            f"\\textit{{{escape_tex(text)}}}" if is_error else escape_tex(text)
            for text, is_error in row
        ]
        lines.append(" & ".join(cells) + " \\\\")
    lines.append("\\end{tabular}")
    return "\n".join(lines)


# --- Core -------------------------------------------------------------------


def _set_executable(state: EngineState, call: CommandCall) -> CommandResult:
    raw = call.args[0].strip()
    if not raw:
        raise MalformedArgument("\\setExecutable expects an executable path")
    path = Path(raw)
    if not path.is_absolute():
        path = state.doc_dir / path
    if not path.is_file():
        raise SpawnFailure(f"executable {raw!r} not found under {state.doc_dir}")
    if state.session is not None:
        state.transcripts.append((str(state.executable), state.session.transcript))
        state.session.close()
        state.session = None
    if state.session_factory is not None:
        session = state.session_factory(state, path)
    else:
        session = start_session(
            str(path),
            gdb_path=state.gdb_path,
            timeout=state.timeout,
            cwd=state.doc_dir,
        )
    state.session = session
    state.executable = path
    state.source_files = dict(session.source_files)
    # Debugger state is now fully determined by this binary: reseed the
    # mutation history from its contents.
    state.mutation_history_digest = hashlib.sha256(path.read_bytes()).digest()
    diagnostics = [d.format() for d in session.diagnostics]
    return CommandResult(fragments={"html": "", "tex": ""}, diagnostics=diagnostics)


def _run_until(state: EngineState, call: CommandCall) -> CommandResult:
    target = _single_line_location(call.args[0], "\\runUntil")
    session = state.require_session()
    session.run_until(target)
    return CommandResult(fragments={"html": "", "tex": ""})


# --- GDBEval ----------------------------------------------------------------


def _gdb_eval_int(state: EngineState, call: CommandCall) -> CommandResult:
    session = state.require_session()
    value = session.evaluate(call.args[0])
    text = value.strip()
    if not _INT_RE.fullmatch(text):
        raise NonIntegerValue(
            f"\\gdbEvalInt requires an integer-valued expression; "
            f"{call.args[0]!r} evaluated to {value!r}"
        )
    rendered = str(int(text))
    return CommandResult(
        fragments={"html": rendered, "tex": rendered}, cacheable=True
    )


# --- Print ------------------------------------------------------------------


def _print_code(state: EngineState, call: CommandCall) -> CommandResult:
    locs = parse_location_spec(call.args[0])
    if len(locs.entries) != 1:
        raise MalformedArgument(
            f"\\printCode expects a single file or file range, got {call.args[0]!r}"
        )
    entry = locs.entries[0]
    snippet = _snippet(state, entry.file, entry.lines)
    return CommandResult(
        fragments={"html": _snippet_html(snippet), "tex": _snippet_tex(snippet)}
    )


def _print_call_stack(state: EngineState, call: CommandCall) -> CommandResult:
    session = state.require_session()
    frames = session.list_frames()
    rows = [
        [
            (str(f.level), False),
            (f.function, False),
            (f"{f.location.file}:{f.location.line}", False),
        ]
        for f in frames
    ]
    headers = ["level", "function", "location"]
    return CommandResult(
        fragments={
            "html": _table_html("trex-callstack", headers, rows),
            "tex": _table_tex("rll", headers, rows),
        },
        cacheable=True,
    )


def _print_expression_table(state: EngineState, call: CommandCall) -> CommandResult:
    raw = call.args[0]
    exprs = [e.strip() for e in raw.split(",")]
    if not exprs or any(not e for e in exprs):
        raise MalformedArgument(
            f"\\printExpressionTable expects a non-empty, comma-separated "
            f"expression list, got {raw!r}"
        )
    session = state.require_session()
    rows: list[list[tuple[str, bool]]] = []
    diagnostics: list[str] = []
    for expr in exprs:
        try:
            rows.append([(expr, False), (session.evaluate(expr), False)])
        except EvalError as exc:
            rows.append([(expr, False), (f"error: {exc.message}", True)])
            diagnostics.append(
                f"warning: EvalError: expression {expr!r} in "
                f"\\printExpressionTable: {exc.message}"
            )
    headers = ["expression", "value"]
    return CommandResult(
        fragments={
            "html": _table_html("trex-exprtable", headers, rows),
            "tex": _table_tex("ll", headers, rows),
        },
        cacheable=True,
        diagnostics=diagnostics,
    )


# --- SingleStepper ----------------------------------------------------------


def _parse_frame_cap(call: CommandCall) -> int:
    raw = call.options.get("max")
    if raw is None:
        return DEFAULT_TEX_FRAME_CAP
    try:
        cap = int(raw.strip())
    except ValueError:
        cap = 0
    if cap < 1:
        raise MalformedArgument(
            f"\\singleStepper max= expects a positive frame count, got {raw!r}"
        )
    return cap


def _execute_body(
    state: EngineState,
    body_items: list,
    frame_index: int,
    location: SourceLocation,
    outer: CommandCall,
) -> dict[str, str]:
    html_parts: list[str] = []
    tex_parts: list[str] = []
    for item in body_items:
        if isinstance(item, Passthrough):
            html_parts.append(item.rendered)
            tex_parts.append(item.rendered)
            continue
        try:
            result = execute_call(state, item)
        except TrexError as exc:
            # Body spans are relative to the body text; report the
            # stepper's own document span instead, plus frame context.
            exc.message = (
                f"frame {frame_index} at {location.file}:{location.line}: "
                f"{exc.message}"
            )
            exc.args = (exc.message,)
            exc.span = outer.span
            raise
        html_parts.append(result.fragments.get("html", ""))
        tex_parts.append(result.fragments.get("tex", ""))
    return {"html": "".join(html_parts), "tex": "".join(tex_parts)}


def _stepper_windows(
    state: EngineState, record_at: LocationSet, until: SourceLocation | None
) -> list[CodeSnippet]:
    windows = [_snippet(state, e.file, e.lines) for e in record_at.entries]
    if until is not None and not any(
        w.covers(until.file, until.line) for w in windows
    ):
        path = _resolve_source(state, until.file)
        total = len(_read_lines(path, until.file))
        if until.line > total:
            raise RangeOutOfBounds(
                f"{until.file} has {total} lines; requested {until.line}"
            )
        first = max(1, until.line - 2)
        last = min(total, until.line + 2)
        windows.append(_snippet(state, until.file, (first, last)))
    return windows


def _stepper_html(seq: FrameSequence) -> str:
    payload = render.stepper_data_json(seq)
    items = []
    for frame in seq.frames:
        items.append(
            f'<li class="trex-stepper-frame" data-index="{frame.index}">'
            f'<span class="trex-stepper-loc">'
            f"frame {frame.index}: "
            f"{escape_html(f'{frame.location.file}:{frame.location.line}')}"
            f"</span>"
            f'<div class="trex-stepper-body">{frame.fragments["html"]}</div>'
            f"</li>"
        )
    if items:
        fallback = f'<ol class="trex-stepper-frames" start="0">{"".join(items)}</ol>'
    else:
        fallback = '<p class="trex-stepper-notice">No frames were recorded.</p>'
    return (
        f'<script type="application/json" class="trex-stepper-data" '
        f'id="{seq.stepper_id}">{payload}</script>'
        f'<div class="trex-stepper" data-trex-stepper="{seq.stepper_id}">'
        f"{fallback}</div>"
    )


def _stepper_tex(seq: FrameSequence) -> str:
    if not seq.frames:
        return "\\textit{No frames were recorded.}"
    blocks = []
    for frame in seq.frames:
        loc = escape_tex(f"{frame.location.file}:{frame.location.line}")
        blocks.append(
            f"\\par\\noindent\\texttt{{frame {frame.index}: {loc}}}\\par\n"
            f"{frame.fragments['tex']}"
        )
    return "\n".join(blocks)


def _single_stepper(state: EngineState, call: CommandCall) -> CommandResult:
    session = state.require_session()
    record_at = parse_location_spec(call.args[0])
    until = None
    if "until" in call.options:
        until = _single_line_location(call.options["until"], "\\singleStepper until=")
    tex_cap = _parse_frame_cap(call)
    body_stream = scan_document(
        call.body or "", state.dialect, state.scan_table(), strict=state.strict
    )

    seq = FrameSequence(stepper_id=f"trex-stepper-{state.stepper_count}")
    state.stepper_count += 1
    diagnostics: list[str] = []

    windows = _stepper_windows(state, record_at, until)
    seq.source_windows = windows

    diag_start = len(session.diagnostics)
    for index, event in enumerate(
        session.step_with_filter(record_at, until=until, max_frames=state.max_frames)
    ):
        loc = event.location
        state.fold_mutation(f"frame:{index}:{loc.file}:{loc.line}".encode())
        fragments = _execute_body(state, body_stream.items, index, loc, call)
        seq.frames.append(StepperFrame(index=index, location=loc, fragments=fragments))
    diagnostics.extend(d.format() for d in session.diagnostics[diag_start:])

    if not seq.frames:
        diagnostics.append(
            "warning: EmptyStepper: \\singleStepper recorded no frames; "
            "the program never stopped inside the recorded locations"
        )

    fragments = {"html": _stepper_html(seq)}
    if len(seq.frames) <= tex_cap:
        fragments["tex"] = _stepper_tex(seq)
    elif state.output_format == "latex-aux":
        raise FrameLimitExceeded(
            f"\\singleStepper recorded {len(seq.frames)} frames but TeX "
            f"output is capped at {tex_cap}; narrow the recording with "
            f"until= or raise max="
        )
    return CommandResult(
        fragments=fragments,
        diagnostics=diagnostics,
        frame_sequence=seq,
    )


# --- registry ---------------------------------------------------------------


def _desc(
    name: str,
    arity: int,
    handler,
    *,
    body: bool = False,
    cacheable: bool = False,
    mutating: bool = False,
    control: bool = False,
    module: str = "Core",
) -> CommandDescriptor:
    return CommandDescriptor(
        name=name,
        spec=CommandSpec(arity=arity, takes_body=body),
        handler=handler,
        cacheable=cacheable,
        mutating=mutating,
        control=control,
        origin=f"built_in.{module}",
    )


MODULES: dict[str, list[CommandDescriptor]] = {
    "Core": [
        _desc("trexInitialize", 2, handle_trex_initialize, control=True),
        _desc("uncache", 1, handle_uncache, control=True),
        _desc("setExecutable", 1, _set_executable, mutating=True),
        _desc("runUntil", 1, _run_until, mutating=True),
    ],
    "GDBEval": [
        _desc("gdbEvalInt", 1, _gdb_eval_int, cacheable=True, module="GDBEval"),
    ],
    "Print": [
        _desc("printCode", 1, _print_code, module="Print"),
        _desc("printCallStack", 0, _print_call_stack, cacheable=True, module="Print"),
        _desc(
            "printExpressionTable",
            1,
            _print_expression_table,
            cacheable=True,
            module="Print",
        ),
    ],
    "SingleStepper": [
        _desc(
            "singleStepper",
            1,
            _single_stepper,
            body=True,
            mutating=True,
            module="SingleStepper",
        ),
    ],
}
