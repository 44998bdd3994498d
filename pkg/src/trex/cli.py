"""Command-line interface: build documents, collect cache garbage."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import engine, render
from .cache import CacheStore, NullCache
from .errors import TrexError


def _line_col(text: str, offset: int) -> tuple[int, int]:
    offset = max(0, min(offset, len(text)))
    line = text.count("\n", 0, offset) + 1
    col = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, col


def _report_error(document: Path, text: str, exc: TrexError) -> None:
    where = str(document)
    if exc.span is not None:
        line, col = _line_col(text, exc.span[0])
        where = f"{document}:{line}:{col}"
    click.echo(f"error: {where}: {exc.message}", err=True)


def _write_transcripts(state: engine.EngineState, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for label, transcript in state.all_transcripts():
            for entry in transcript:
                fh.write(json.dumps({"executable": label, **entry}) + "\n")


@click.group()
@click.version_option(package_name="trex")
def main() -> None:
    """Compile documents whose embedded commands run a live debugger."""


@main.command()
@click.argument(
    "document", type=click.Path(exists=True, dir_okay=False, path_type=Path)
)
@click.option(
    "--format",
    "output_format",
    type=click.Choice(["html", "latex-aux"]),
    default="html",
    show_default=True,
    help="html compiles a source document; latex-aux executes a recorded "
    "aux log and writes TeX fragment files.",
)
@click.option(
    "-o",
    "--output",
    type=click.Path(path_type=Path),
    default=None,
    help="Output file (html) or fragment directory (latex-aux). "
    "Defaults to <document>.out.html, or the document's directory.",
)
@click.option(
    "--cache-dir",
    type=click.Path(path_type=Path),
    default=None,
    help="Result cache location [default: .trex-cache beside the document].",
)
@click.option("--no-cache", is_flag=True, help="Neither read nor write the cache.")
@click.option("--strict", is_flag=True, help="Treat unknown \\commands as errors.")
@click.option(
    "--gdb-path",
    envvar="TREX_GDB",
    default="gdb",
    show_default=True,
    help="Debugger executable (env: TREX_GDB).",
)
@click.option("--timeout", type=float, default=30.0, show_default=True,
              help="Per-exchange debugger/plugin timeout in seconds.")
@click.option("--max-frames", type=int, default=2000, show_default=True,
              help="Stepper frame-count safety limit.")
@click.option(
    "--widget-asset",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Substitute stepper widget script to inline.",
)
@click.option(
    "--transcript-out",
    type=click.Path(path_type=Path),
    default=None,
    help="Also write every debugger exchange as JSON lines.",
)
def build(
    document: Path,
    output_format: str,
    output: Path | None,
    cache_dir: Path | None,
    no_cache: bool,
    strict: bool,
    gdb_path: str,
    timeout: float,
    max_frames: int,
    widget_asset: Path | None,
    transcript_out: Path | None,
) -> None:
    """Execute DOCUMENT's embedded commands and write rendered output."""
    text = document.read_text(encoding="utf-8")
    doc_dir = document.parent.resolve()
    if no_cache:
        cache: CacheStore = NullCache()
    else:
        cache = CacheStore(cache_dir if cache_dir else doc_dir / ".trex-cache")
    dialect = "latex" if output_format == "latex-aux" else "html"
    state = engine.new_state(
        doc_dir,
        output_format=output_format,
        dialect=dialect,
        gdb_path=gdb_path,
        timeout=timeout,
        max_frames=max_frames,
        strict=strict,
        cache=cache,
    )
    try:
        try:
            if output_format == "latex-aux":
                stream = engine.prepare_aux(state, text)
            else:
                stream = engine.prepare_document(state, text)
            items = engine.execute_stream(state, stream)
            if output_format == "latex-aux":
                out_dir = output if output else doc_dir
                written = render.emit_latex_fragments(
                    items, out_dir, diagnostics=state.diagnostics
                )
                target = f"{written[-1]} ({len(written) - 1} fragments)"
            else:
                widget = (
                    widget_asset.read_text(encoding="utf-8")
                    if widget_asset
                    else None
                )
                html = render.emit_html(items, widget_script=widget)
                out_path = (
                    output
                    if output
                    else document.with_name(document.stem + ".out.html")
                )
                render.atomic_write(out_path, html)
                target = str(out_path)
        except TrexError as exc:
            for warning in state.diagnostics:
                click.echo(warning, err=True)
            _report_error(document, text, exc)
            sys.exit(1)
    finally:
        state.close()
        if transcript_out is not None:
            _write_transcripts(state, transcript_out)
    for warning in state.diagnostics:
        click.echo(warning, err=True)
    click.echo(f"wrote {target}", err=True)


@main.command("cache-gc")
@click.argument(
    "cache_dir", type=click.Path(exists=True, file_okay=False, path_type=Path)
)
@click.option(
    "--all", "drop_all", is_flag=True, help="Remove every entry, not just stale ones."
)
def cache_gc(cache_dir: Path, drop_all: bool) -> None:
    """Drop cache entries written by other engine versions."""
    removed, kept = CacheStore(cache_dir).gc(drop_all=drop_all)
    click.echo(f"removed {removed} entries, kept {kept}")


if __name__ == "__main__":
    main()
