"""Output assembly: HTML splicing, LaTeX fragment files, stepper data."""

from __future__ import annotations

import json

import pytest

from trex.builtins import CodeSnippet, FrameSequence, StepperFrame
from trex.engine import CommandResult
from trex.errors import MissingFragment
from trex.render import (
    FRAGMENT_PREFIX,
    STATE_FILE_NAME,
    emit_html,
    emit_latex_fragments,
    emit_stepper_data,
    load_asset,
    stepper_data_json,
)
from trex.scanner import CommandCall, Passthrough
from trex.session import SourceLocation


def passthrough(text, start=0):
    return Passthrough(source=text, rendered=text, span=(start, start + len(text)))


def result(html="", tex="", name="gdbEvalInt", span=(0, 0), **kwargs):
    fragments = {}
    if html is not None:
        fragments["html"] = html
    if tex is not None:
        fragments["tex"] = tex
    return CommandResult(
        fragments=fragments,
        call=CommandCall(name=name, span=span),
        **kwargs,
    )


def sample_sequence():
    return FrameSequence(
        frames=[
            StepperFrame(
                index=0,
                location=SourceLocation(file="loop.c", line=10),
                fragments={"html": "sum is 1.", "tex": "sum is 1."},
            ),
            StepperFrame(
                index=1,
                location=SourceLocation(file="loop.c", line=11),
                fragments={"html": "sum is <b>1</b>.", "tex": "sum is 1."},
            ),
        ],
        source_windows=[
            CodeSnippet(file="loop.c", first_line=10, lines=["a;", "b;"])
        ],
        stepper_id="trex-stepper-0",
    )


class TestEmitHtml:
    def test_splices_fragments_between_text(self):
        items = [
            passthrough("<p>x is "),
            result(html="70"),
            passthrough(".</p>"),
        ]
        html = emit_html(items)
        assert html.startswith("<p>x is 70.</p>")

    def test_style_injected_once(self):
        html = emit_html([passthrough("hello")])
        assert html.count('<style class="trex-style">') == 1

    def test_widget_script_only_with_stepper(self):
        plain = emit_html([passthrough("x"), result(html="70")])
        assert '<script class="trex-stepper-widget">' not in plain

        seq = sample_sequence()
        with_stepper = emit_html(
            [result(html="<div>stub</div>", frame_sequence=seq)]
        )
        assert with_stepper.count('<script class="trex-stepper-widget">') == 1
        assert "trex-stepper-data" in load_asset("stepper.js")

    def test_widget_script_substitution(self):
        seq = sample_sequence()
        html = emit_html(
            [result(html="<div>stub</div>", frame_sequence=seq)],
            widget_script="/* custom widget */",
        )
        assert "/* custom widget */" in html
        assert html.count('<script class="trex-stepper-widget">') == 1

    def test_injection_goes_before_body_close(self):
        items = [passthrough("<html><body><p>hi</p></body></html>")]
        html = emit_html(items)
        style_at = html.index('<style class="trex-style">')
        assert style_at < html.index("</body>")

    def test_missing_html_fragment(self):
        items = [result(html=None, tex="70", span=(5, 19))]
        with pytest.raises(MissingFragment) as info:
            emit_html(items)
        assert info.value.span == (5, 19)

    def test_escape_collapse_uses_rendered_text(self):
        item = Passthrough(
            source="type \\\\gdbEvalInt{x}",
            rendered="type \\gdbEvalInt{x}",
            span=(0, 20),
        )
        html = emit_html([item])
        assert "type \\gdbEvalInt{x}" in html
        assert "\\\\gdbEvalInt" not in html

    def test_deterministic(self):
        items = [passthrough("a"), result(html="70"), passthrough("b")]
        assert emit_html(items) == emit_html(items)


class TestEmitLatexFragments:
    def test_writes_fragments_and_state(self, tmp_path):
        items = [
            result(tex="", name="setExecutable"),
            result(tex="70", name="gdbEvalInt"),
        ]
        for i, item in enumerate(items):
            item.call.aux_index = i
        written = emit_latex_fragments(items, tmp_path)
        assert [p.name for p in written] == [
            f"{FRAGMENT_PREFIX}0.tex",
            f"{FRAGMENT_PREFIX}1.tex",
            STATE_FILE_NAME,
        ]
        assert (tmp_path / "trex-frag-1.tex").read_text() == "70"
        state = json.loads((tmp_path / STATE_FILE_NAME).read_text())
        assert state["fragments"] == ["trex-frag-0.tex", "trex-frag-1.tex"]

    def test_indices_follow_aux_order(self, tmp_path):
        item = result(tex="x")
        item.call.aux_index = 7
        written = emit_latex_fragments([item], tmp_path)
        assert written[0].name == "trex-frag-7.tex"

    def test_missing_tex_fragment(self, tmp_path):
        with pytest.raises(MissingFragment):
            emit_latex_fragments([result(html="70", tex=None)], tmp_path)

    def test_passthrough_items_ignored(self, tmp_path):
        written = emit_latex_fragments(
            [passthrough("\\documentclass{article}"), result(tex="70")], tmp_path
        )
        assert [p.name for p in written] == ["trex-frag-0.tex", STATE_FILE_NAME]

    def test_diagnostics_recorded_in_state(self, tmp_path):
        emit_latex_fragments(
            [result(tex="70")], tmp_path, diagnostics=["warning: something odd"]
        )
        state = json.loads((tmp_path / STATE_FILE_NAME).read_text())
        assert state["diagnostics"] == ["warning: something odd"]


class TestStepperData:
    def test_schema(self):
        data = emit_stepper_data(sample_sequence())
        assert data == {
            "version": 1,
            "source_windows": [
                {"file": "loop.c", "first_line": 10, "lines": ["a;", "b;"]}
            ],
            "frames": [
                {"index": 0, "file": "loop.c", "line": 10, "html": "sum is 1."},
                {
                    "index": 1,
                    "file": "loop.c",
                    "line": 11,
                    "html": "sum is <b>1</b>.",
                },
            ],
        }

    def test_json_is_script_safe(self):
        seq = sample_sequence()
        seq.frames[0].fragments["html"] = "<script>alert(1)</script>"
        payload = stepper_data_json(seq)
        assert "</script>" not in payload
        restored = json.loads(payload.replace("<\\/", "</"))
        assert restored["frames"][0]["html"] == "<script>alert(1)</script>"

    def test_round_trips_through_json(self):
        payload = stepper_data_json(sample_sequence())
        assert json.loads(payload)["version"] == 1
