"""Scanner tests: command recognition, escapes, spans, locations, aux logs."""

from __future__ import annotations

import base64

import pytest
from hypothesis import given, strategies as st

from trex.errors import (
    EmptySpec,
    MalformedAuxLine,
    MalformedOptions,
    MalformedRange,
    MissingArgument,
    NonContiguousIndices,
    UnbalancedBraces,
    UnknownCommand,
)
from trex.scanner import (
    CommandCall,
    CommandSpec,
    LocationEntry,
    LocationSet,
    Passthrough,
    format_aux_line,
    format_location_spec,
    parse_aux_log,
    parse_location_spec,
    scan_document,
)

TABLE = {
    "setExecutable": CommandSpec(arity=1),
    "runUntil": CommandSpec(arity=1),
    "gdbEvalInt": CommandSpec(arity=1),
    "printCode": CommandSpec(arity=1),
    "printCallStack": CommandSpec(arity=0),
    "printExpressionTable": CommandSpec(arity=1),
    "singleStepper": CommandSpec(arity=1, takes_body=True),
    "trexInitialize": CommandSpec(arity=2),
    "uncache": CommandSpec(arity=1),
    "printProcTree": CommandSpec(arity=1),
}


def scan(text: str, **kw) -> list:
    return scan_document(text, "html", TABLE, **kw).items


class TestScanDocument:
    def test_single_call_with_surrounding_text(self):
        items = scan("The value of x is \\gdbEvalInt{x}.")
        assert len(items) == 3
        assert isinstance(items[0], Passthrough)
        assert items[0].rendered == "The value of x is "
        call = items[1]
        assert isinstance(call, CommandCall)
        assert call.name == "gdbEvalInt"
        assert call.args == ["x"]
        assert call.options == {}
        assert call.body is None
        assert isinstance(items[2], Passthrough)
        assert items[2].rendered == "."

    def test_no_commands(self):
        items = scan("no commands here")
        assert len(items) == 1
        assert isinstance(items[0], Passthrough)
        assert items[0].rendered == "no commands here"

    def test_empty_document(self):
        assert scan("") == []

    def test_options_args_and_body(self):
        text = (
            "\\singleStepper[until=rbtree_augmented.h:84]"
            "{rbtree_augmented.h:63-87,rbtree.c}"
            "{\\printProcTree{node,root,gparent,parent,old,new}}"
        )
        items = scan(text)
        assert len(items) == 1
        call = items[0]
        assert call.name == "singleStepper"
        assert call.options == {"until": "rbtree_augmented.h:84"}
        assert call.args == ["rbtree_augmented.h:63-87,rbtree.c"]
        assert call.body == "\\printProcTree{node,root,gparent,parent,old,new}"
        assert call.span == (0, len(text))

    def test_body_is_raw_not_parsed(self):
        items = scan("\\singleStepper{main.c}{\\gdbEvalInt{x}}")
        call = items[0]
        assert call.body == "\\gdbEvalInt{x}"
        # The nested command stays raw text; it is not a separate item.
        assert len(items) == 1

    def test_zero_arity_command(self):
        items = scan("stack: \\printCallStack done")
        assert [type(i) for i in items] == [Passthrough, CommandCall, Passthrough]
        assert items[1].args == []
        assert items[2].rendered == " done"

    def test_zero_arity_does_not_eat_following_brackets(self):
        items = scan("\\printCallStack [see below]")
        assert isinstance(items[0], CommandCall)
        assert items[0].options == {}
        assert items[1].rendered == " [see below]"

    def test_options_must_be_immediate(self):
        # A space between name and '[' leaves the bracket group alone.
        items = scan("\\printCallStack  [x=1]")
        assert items[0].options == {}
        assert items[1].rendered == "  [x=1]"

    def test_whitespace_between_groups(self):
        items = scan("\\trexInitialize {pkgs} \n {modules} tail")
        call = items[0]
        assert call.args == ["pkgs", "modules"]
        assert items[1].rendered == " tail"
        # Whitespace between groups lives inside the command span.
        assert call.span == (0, len("\\trexInitialize {pkgs} \n {modules}"))

    def test_nested_braces_in_argument(self):
        items = scan("\\printExpressionTable{a{b}c}")
        assert items[0].args == ["a{b}c"]

    def test_quoted_option_value_with_comma(self):
        items = scan('\\singleStepper[until="a.c:1,b.c:2",max=4]{a.c}{}')
        assert items[0].options == {"until": "a.c:1,b.c:2", "max": "4"}

    def test_quoted_option_escapes(self):
        items = scan('\\singleStepper[until="say \\"hi\\""]{a.c}{}')
        assert items[0].options == {"until": 'say "hi"'}

    def test_duplicate_option_key(self):
        with pytest.raises(MalformedOptions):
            scan("\\singleStepper[max=1,max=2]{a.c}{}")

    def test_option_missing_equals(self):
        with pytest.raises(MalformedOptions):
            scan("\\singleStepper[until]{a.c}{}")

    def test_unknown_command_passes_through(self):
        items = scan("code \\begin{verbatim} x \\alpha")
        assert len(items) == 1
        assert items[0].rendered == "code \\begin{verbatim} x \\alpha"

    def test_unknown_command_strict(self):
        with pytest.raises(UnknownCommand):
            scan("x \\begin{verbatim}", strict=True)

    def test_escape_renders_literal(self):
        items = scan("type \\\\gdbEvalInt{x} to splice")
        assert len(items) == 1
        assert items[0].rendered == "type \\gdbEvalInt{x} to splice"
        assert items[0].source == "type \\\\gdbEvalInt{x} to splice"

    def test_escape_only_for_known_names(self):
        items = scan("a \\\\mystery b")
        assert items[0].rendered == "a \\\\mystery b"

    def test_escape_not_applied_in_latex_dialect(self):
        items = scan_document("\\\\gdbEvalInt{x}", "latex-aux", TABLE).items
        # In LaTeX, \\ is a line break and the command still fires.
        assert any(isinstance(i, CommandCall) for i in items)

    def test_missing_argument_at_end(self):
        with pytest.raises(MissingArgument):
            scan("tail \\gdbEvalInt")

    def test_missing_argument_wrong_delimiter(self):
        with pytest.raises(MissingArgument):
            scan("\\gdbEvalInt(x)")

    def test_unbalanced_braces(self):
        with pytest.raises(UnbalancedBraces) as exc_info:
            scan("\\gdbEvalInt{x")
        assert exc_info.value.span is not None

    def test_unclosed_options(self):
        with pytest.raises((UnbalancedBraces, MalformedOptions)):
            scan("\\singleStepper[until=a.c:1 {a.c}{}")

    def test_spans_tile_the_document(self):
        text = "a \\gdbEvalInt{x} b \\printCallStack c \\\\runUntil{z} d"
        stream = scan_document(text, "html", TABLE)
        pos = 0
        for item in stream.items:
            assert item.span[0] == pos
            pos = item.span[1]
        assert pos == len(text)
        assert stream.round_trip() == text

    def test_spans_do_not_overlap(self):
        stream = scan_document(
            "\\gdbEvalInt{a}\\gdbEvalInt{b}", "html", TABLE
        )
        calls = stream.calls()
        assert len(calls) == 2
        assert calls[0].span[1] <= calls[1].span[0]

    def test_deterministic(self):
        text = "x \\gdbEvalInt{y} \\\\gdbEvalInt{z}"
        a = scan_document(text, "html", TABLE)
        b = scan_document(text, "html", TABLE)
        assert a.items == b.items


@given(
    st.text(
        alphabet=st.sampled_from(list("ab \\{}\ngdbEvalInt[]=,.\"x")),
        max_size=60,
    )
)
def test_round_trip_property(text):
    """Whatever the scanner accepts, spans must reproduce the input."""
    try:
        stream = scan_document(text, "html", TABLE)
    except Exception:
        return
    assert stream.round_trip() == text
    pos = 0
    for item in stream.items:
        assert item.span[0] == pos
        pos = item.span[1]
    assert pos == len(text)


class TestLocationSpec:
    def test_range_and_all_lines(self):
        locs = parse_location_spec("rbtree_augmented.h:63-87,rbtree.c")
        assert locs.entries == (
            LocationEntry(file="rbtree_augmented.h", lines=(63, 87)),
            LocationEntry(file="rbtree.c", lines=None),
        )

    def test_single_line(self):
        locs = parse_location_spec("main.c:25")
        assert locs.entries == (LocationEntry(file="main.c", lines=(25, 25)),)

    def test_empty_is_error(self):
        with pytest.raises(EmptySpec):
            parse_location_spec("")

    def test_reversed_range(self):
        with pytest.raises(MalformedRange):
            parse_location_spec("a.c:9-3")

    def test_non_numeric(self):
        with pytest.raises(MalformedRange):
            parse_location_spec("a.c:x-3")

    def test_unicode_digits_rejected(self):
        # str.isdigit accepts these but int() does not; they must be
        # malformed specs, not crashes.
        with pytest.raises(MalformedRange):
            parse_location_spec("a.c:²")
        with pytest.raises(MalformedRange):
            parse_location_spec("a.c:١-٣")

    def test_zero_line(self):
        with pytest.raises(MalformedRange):
            parse_location_spec("a.c:0")

    def test_trailing_comma(self):
        with pytest.raises(MalformedRange):
            parse_location_spec("a.c:1,")

    def test_path_with_directory(self):
        locs = parse_location_spec("src/sub/main.c:3-5")
        assert locs.entries[0].file == "src/sub/main.c"

    def test_covers(self):
        locs = parse_location_spec("a.h:10-20,b.c")
        assert locs.covers("a.h", 10)
        assert locs.covers("a.h", 20)
        assert not locs.covers("a.h", 21)
        assert locs.covers("b.c", 999)
        assert not locs.covers("c.c", 1)

    def test_format_inverse(self):
        for spec in ["main.c:25", "a.h:63-87,b.c", "x.c,y.c:1,z.c:2-9"]:
            assert format_location_spec(parse_location_spec(spec)) == spec


@given(
    st.lists(
        st.tuples(
            st.text(alphabet="abc_./", min_size=1, max_size=8).filter(
                lambda s: ":" not in s and "," not in s and "-" not in s and s.strip()
            ),
            st.one_of(
                st.none(),
                st.tuples(
                    st.integers(min_value=1, max_value=999),
                    st.integers(min_value=0, max_value=50),
                ).map(lambda t: (t[0], t[0] + t[1])),
            ),
        ),
        min_size=1,
        max_size=5,
    )
)
def test_location_format_parse_identity(entries):
    locs = LocationSet(
        entries=tuple(LocationEntry(file=f, lines=l) for f, l in entries)
    )
    assert parse_location_spec(format_location_spec(locs)) == locs


class TestAuxLog:
    def test_single_line(self):
        text = format_aux_line(0, "\\setExecutable{src/main}")
        calls = parse_aux_log(text + "\n", TABLE)
        assert len(calls) == 1
        assert calls[0].name == "setExecutable"
        assert calls[0].args == ["src/main"]
        assert calls[0].aux_index == 0

    def test_empty_file(self):
        assert parse_aux_log("", TABLE) == []
        assert parse_aux_log("\n\n", TABLE) == []

    def test_non_contiguous_indices(self):
        text = (
            format_aux_line(0, "\\printCallStack")
            + "\n"
            + format_aux_line(2, "\\printCallStack")
            + "\n"
        )
        with pytest.raises(NonContiguousIndices):
            parse_aux_log(text, TABLE)

    def test_document_order_preserved(self):
        lines = [
            format_aux_line(0, "\\setExecutable{src/main}"),
            format_aux_line(1, "\\runUntil{main.c:25}"),
            format_aux_line(2, "\\gdbEvalInt{x}"),
        ]
        calls = parse_aux_log("\n".join(lines), TABLE)
        assert [c.name for c in calls] == ["setExecutable", "runUntil", "gdbEvalInt"]
        assert [c.aux_index for c in calls] == [0, 1, 2]

    def test_unicode_payload(self):
        calls = parse_aux_log(format_aux_line(0, "\\gdbEvalInt{é_count}"), TABLE)
        assert calls[0].args == ["é_count"]

    def test_garbage_line(self):
        with pytest.raises(MalformedAuxLine) as exc_info:
            parse_aux_log("!trex!zero!YQ==", TABLE)
        assert exc_info.value.line_no == 1

    def test_unicode_digit_index_rejected(self):
        with pytest.raises(MalformedAuxLine):
            parse_aux_log("!trex!²!YQ==", TABLE)

    def test_non_aux_line(self):
        with pytest.raises(MalformedAuxLine):
            parse_aux_log("\\relax", TABLE)

    def test_bad_base64(self):
        with pytest.raises(MalformedAuxLine):
            parse_aux_log("!trex!0!!!not-base64!!", TABLE)

    def test_payload_with_two_commands(self):
        payload = base64.b64encode(
            b"\\printCallStack\\printCallStack"
        ).decode("ascii")
        with pytest.raises(MalformedAuxLine):
            parse_aux_log(f"!trex!0!{payload}", TABLE)

    def test_payload_with_stray_text(self):
        payload = base64.b64encode(b"hello \\printCallStack").decode("ascii")
        with pytest.raises(MalformedAuxLine):
            parse_aux_log(f"!trex!0!{payload}", TABLE)

    def test_round_trip_with_options_and_body(self):
        source = "\\singleStepper[until=a.c:9]{a.c:1-9}{\\printProcTree{n}}"
        calls = parse_aux_log(format_aux_line(0, source), TABLE)
        call = calls[0]
        assert call.options == {"until": "a.c:9"}
        assert call.args == ["a.c:1-9"]
        assert call.body == "\\printProcTree{n}"
