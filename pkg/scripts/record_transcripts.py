#!/usr/bin/env python3
"""Record the debugger transcripts the replay tests run against.

Builds each fixture in temp space, drives the scenario ops against a live
debugger, and freezes (transcript, observations) pairs under
tests/fixtures/transcripts/. Re-run whenever session command sequences
change; the replay tests fail loudly (ReplayMismatch) when stale.
"""

from __future__ import annotations

import json
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "tests"))

from conftest import FIXTURES, TRANSCRIPTS, compile_tree  # noqa: E402
from transcript_cases import CASES  # noqa: E402

from trex.session import start_session  # noqa: E402


def main() -> int:
    TRANSCRIPTS.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        built: dict[str, Path] = {}
        for name, case in CASES.items():
            fixture = case["fixture"]
            key = f"{fixture}:{name if 'prepare' in case else ''}"
            if key not in built:
                dst = Path(tmp) / key.replace(":", "_")
                shutil.copytree(FIXTURES / fixture, dst)
                compile_tree(dst)
                if "prepare" in case:
                    case["prepare"](dst)
                built[key] = dst
            root = built[key]
            session = start_session(case["executable"], cwd=root)
            try:
                obs = case["ops"](session)
            finally:
                session.close()
            (TRANSCRIPTS / f"{name}.jsonl").write_text(
                "".join(
                    json.dumps(e, ensure_ascii=False) + "\n"
                    for e in session.transcript
                ),
                encoding="utf-8",
            )
            (TRANSCRIPTS / f"{name}.expected.json").write_text(
                json.dumps(obs, indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )
            print(f"recorded {name}: {len(session.transcript)} lines, obs={obs}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
