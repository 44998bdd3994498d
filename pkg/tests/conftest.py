"""Shared test fixtures: compiled C programs in temp copies of the corpus."""

from __future__ import annotations

import shutil
import subprocess
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"
TRANSCRIPTS = FIXTURES / "transcripts"

CFLAGS = ["-O0", "-ggdb3"]


def compile_tree(root: Path) -> None:
    """Compile every .c file under root, binary named after the source stem.

    Compilation runs with the source's own directory as cwd so debug info
    records bare file names, keeping breakpoint specs and transcripts
    machine-independent.
    """
    for c_file in sorted(root.rglob("*.c")):
        subprocess.run(
            ["gcc", *CFLAGS, "-o", c_file.stem, c_file.name],
            cwd=c_file.parent,
            check=True,
            capture_output=True,
        )


@pytest.fixture(scope="session")
def gdb_path() -> str:
    path = shutil.which("gdb")
    if path is None:
        pytest.skip("no gdb on PATH")
    return path


@pytest.fixture(scope="session")
def build_fixture(tmp_path_factory):
    """Factory: copy a named fixture dir to temp space and compile it.

    Shared (cached) copies are read-only by convention; pass fresh=True
    for a private copy a test may mutate.
    """
    if shutil.which("gcc") is None:
        pytest.skip("no C compiler on PATH")
    cache: dict[str, Path] = {}

    def get(name: str, fresh: bool = False) -> Path:
        if fresh:
            dst = tmp_path_factory.mktemp(f"{name}_fresh") / name
            shutil.copytree(FIXTURES / name, dst)
            compile_tree(dst)
            return dst
        if name not in cache:
            dst = tmp_path_factory.mktemp("shared") / name
            shutil.copytree(FIXTURES / name, dst)
            compile_tree(dst)
            cache[name] = dst
        return cache[name]

    return get
