"""MI parser tests against lines captured verbatim from a live debugger."""

from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from trex.errors import MIGrammarError
from trex.mi import MIRecord, parse_mi_line


class TestResultRecords:
    def test_done_bare(self):
        rec = parse_mi_line("^done")
        assert rec.kind == "result"
        assert rec.cls == "done"
        assert rec.payload == {}
        assert rec.token is None

    def test_done_with_value(self):
        rec = parse_mi_line('^done,value="42"')
        assert rec.kind == "result"
        assert rec.cls == "done"
        assert rec.payload == {"value": "42"}

    def test_running(self):
        rec = parse_mi_line("^running")
        assert rec.cls == "running"

    def test_error_with_escaped_quotes(self):
        rec = parse_mi_line('^error,msg="No line 99 in file \\"main.c\\"."')
        assert rec.cls == "error"
        assert rec.payload["msg"] == 'No line 99 in file "main.c".'

    def test_error_not_being_run(self):
        rec = parse_mi_line('^error,msg="The program is not being run."')
        assert rec.payload["msg"] == "The program is not being run."

    def test_token(self):
        rec = parse_mi_line('7^done,value="2"')
        assert rec.token == 7
        assert rec.payload == {"value": "2"}

    def test_unknown_result_class(self):
        with pytest.raises(MIGrammarError):
            parse_mi_line("^finished")

    def test_breakpoint_tuple(self):
        line = (
            '^done,bkpt={number="1",type="breakpoint",disp="del",enabled="y",'
            'addr="0x0000000000001194",func="main",file="main.c",'
            'fullname="/tmp/scratch/src/main.c",line="25",thread-groups=["i1"],'
            'times="0",original-location="main.c:25"}'
        )
        rec = parse_mi_line(line)
        bkpt = rec.payload["bkpt"]
        assert bkpt["number"] == "1"
        assert bkpt["disp"] == "del"
        assert bkpt["line"] == "25"
        assert bkpt["thread-groups"] == ["i1"]

    def test_line_table_list(self):
        rec = parse_mi_line(
            '^done,lines=[{pc="0x1149",line="4"},{pc="0x1151",line="5"},'
            '{pc="0x1160",line="0"}]'
        )
        assert rec.payload["lines"] == [
            {"pc": "0x1149", "line": "4"},
            {"pc": "0x1151", "line": "5"},
            {"pc": "0x1160", "line": "0"},
        ]

    def test_stack_list_of_results(self):
        rec = parse_mi_line(
            '^done,stack=[frame={level="0",func="insert",file="main.c",line="5"},'
            'frame={level="1",func="main",file="main.c",line="11"}]'
        )
        stack = rec.payload["stack"]
        assert stack[0] == {"frame": {"level": "0", "func": "insert",
                                      "file": "main.c", "line": "5"}}
        assert stack[1]["frame"]["level"] == "1"

    def test_source_files_listing(self):
        rec = parse_mi_line(
            '^done,files=[{file="main.c",fullname="/tmp/scratch/src/main.c",'
            'debug-fully-read="false"}]'
        )
        assert rec.payload["files"][0]["file"] == "main.c"

    def test_empty_list_and_tuple(self):
        rec = parse_mi_line("^done,args=[],extra={}")
        assert rec.payload == {"args": [], "extra": {}}


class TestAsyncRecords:
    def test_exec_async_running(self):
        rec = parse_mi_line('*running,thread-id="all"')
        assert rec.kind == "exec-async"
        assert rec.cls == "running"
        assert rec.payload == {"thread-id": "all"}

    def test_stopped_breakpoint_hit(self):
        line = (
            '*stopped,reason="breakpoint-hit",disp="del",bkptno="1",'
            'frame={addr="0x00005555555551bb",func="main",args=[],file="main.c",'
            'fullname="/tmp/scratch/src/main.c",line="25",arch="i386:x86-64"},'
            'thread-id="1",stopped-threads="all",core="0"'
        )
        rec = parse_mi_line(line)
        assert rec.kind == "exec-async"
        assert rec.cls == "stopped"
        assert rec.payload["reason"] == "breakpoint-hit"
        frame = rec.payload["frame"]
        assert frame["func"] == "main"
        assert frame["line"] == "25"
        assert frame["args"] == []

    def test_stopped_exited_normally(self):
        rec = parse_mi_line('*stopped,reason="exited-normally"')
        assert rec.payload == {"reason": "exited-normally"}

    def test_stopped_exited_with_octal_code(self):
        rec = parse_mi_line('*stopped,reason="exited",exit-code="03"')
        assert rec.payload["exit-code"] == "03"

    def test_notify_async(self):
        rec = parse_mi_line('=thread-group-added,id="i1"')
        assert rec.kind == "notify-async"
        assert rec.cls == "thread-group-added"
        assert rec.payload == {"id": "i1"}

    def test_breakpoint_deleted(self):
        rec = parse_mi_line('=breakpoint-deleted,id="1"')
        assert rec.cls == "breakpoint-deleted"

    def test_status_async(self):
        rec = parse_mi_line('+download,section=".text",section-size="512"')
        assert rec.kind == "status-async"
        assert rec.cls == "download"


class TestStreamRecords:
    def test_console_stream_unescapes(self):
        rec = parse_mi_line('~"Reading symbols from src/main...\\n"')
        assert rec.kind == "console-stream"
        assert rec.payload["text"] == "Reading symbols from src/main...\n"

    def test_log_stream(self):
        rec = parse_mi_line('&"warning: watch out\\n"')
        assert rec.kind == "log-stream"
        assert rec.payload["text"] == "warning: watch out\n"

    def test_target_stream(self):
        rec = parse_mi_line('@"output"')
        assert rec.kind == "target-stream"
        assert rec.payload["text"] == "output"

    def test_octal_escape(self):
        rec = parse_mi_line('~"caf\\303\\251\\n"')
        assert rec.payload["text"].encode("latin-1").decode("utf-8") == "café\n"

    def test_tab_and_backslash_escapes(self):
        rec = parse_mi_line('~"a\\tb\\\\c"')
        assert rec.payload["text"] == "a\tb\\c"


class TestPromptAndErrors:
    def test_prompt_with_trailing_space(self):
        rec = parse_mi_line("(gdb) ")
        assert rec.kind == "prompt"

    def test_prompt_bare(self):
        assert parse_mi_line("(gdb)").kind == "prompt"

    def test_trailing_newline_tolerated(self):
        assert parse_mi_line("^done\r\n").cls == "done"

    def test_empty_line(self):
        with pytest.raises(MIGrammarError):
            parse_mi_line("")

    def test_raw_program_output_rejected(self):
        with pytest.raises(MIGrammarError) as exc_info:
            parse_mi_line("x start 35")
        assert exc_info.value.offset is not None

    def test_unterminated_string(self):
        with pytest.raises(MIGrammarError):
            parse_mi_line('^done,value="42')

    def test_trailing_junk(self):
        with pytest.raises(MIGrammarError):
            parse_mi_line('^done,value="42"garbage')

    def test_stream_with_token_rejected(self):
        with pytest.raises(MIGrammarError):
            parse_mi_line('5~"x"')

    def test_missing_value(self):
        with pytest.raises(MIGrammarError):
            parse_mi_line("^done,value=")

    def test_unicode_digit_token_rejected(self):
        # str.isdigit accepts '²' but int() does not; must degrade to a
        # grammar error, never a ValueError.
        with pytest.raises(MIGrammarError):
            parse_mi_line("²")


@given(st.text(max_size=120))
def test_parser_never_panics(line):
    """Arbitrary input parses to a record or raises MIGrammarError only."""
    try:
        rec = parse_mi_line(line)
    except MIGrammarError:
        return
    assert isinstance(rec, MIRecord)


@given(
    st.text(
        alphabet=st.sampled_from(list('^*=+~&@"{}[],=abc\\n0123 ')),
        max_size=80,
    )
)
def test_parser_never_panics_structured(line):
    """Inputs biased toward MI syntax still never escape the error type."""
    try:
        parse_mi_line(line)
    except MIGrammarError:
        pass
