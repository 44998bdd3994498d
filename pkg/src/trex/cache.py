"""Directory-backed result cache keyed on mutation-history digests.

Layout: ``<cache_dir>/<2-hex-prefix>/<digest>`` JSON entries plus a
``VERSION`` tag file at the root. Every entry also records the engine
version that wrote it; entries from other versions are treated as
missing, never misread.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
from pathlib import Path

from . import __version__

ENGINE_VERSION = f"trex-{__version__}"


class CacheStore:
    def __init__(self, directory: str | Path, version: str = ENGINE_VERSION) -> None:
        self.directory = Path(directory)
        self.version = version
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def _entry_path(self, digest: str) -> Path:
        return self.directory / digest[:2] / digest

    def _write_version_tag(self) -> None:
        tag = self.directory / "VERSION"
        if not tag.exists():
            tag.write_text(self.version + "\n", encoding="utf-8")

    def get(self, digest: str) -> dict | None:
        """The stored entry payload, or None on miss/version mismatch."""
        with self._lock:
            path = self._entry_path(digest)
            try:
                data = json.loads(path.read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError):
                self.misses += 1
                return None
            if data.get("version") != self.version:
                self.misses += 1
                return None
            self.hits += 1
            return data

    def put(self, digest: str, payload: dict) -> None:
        """Store an entry atomically (temp file + rename)."""
        with self._lock:
            path = self._entry_path(digest)
            path.parent.mkdir(parents=True, exist_ok=True)
            self._write_version_tag()
            record = {"version": self.version, **payload}
            fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as fh:
                    json.dump(record, fh, ensure_ascii=False, sort_keys=True)
                os.replace(tmp, path)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise

    def gc(self, drop_all: bool = False) -> tuple[int, int]:
        """Remove stale entries; returns (removed, kept).

        Stale = written by a different engine version. ``drop_all``
        removes everything.
        """
        removed = kept = 0
        with self._lock:
            if not self.directory.is_dir():
                return (0, 0)
            for prefix in sorted(self.directory.iterdir()):
                if not prefix.is_dir() or len(prefix.name) != 2:
                    continue
                for entry in sorted(prefix.iterdir()):
                    stale = drop_all
                    if not stale:
                        try:
                            data = json.loads(entry.read_text(encoding="utf-8"))
                            stale = data.get("version") != self.version
                        except (OSError, json.JSONDecodeError):
                            stale = True
                    if stale:
                        entry.unlink()
                        removed += 1
                    else:
                        kept += 1
                if not any(prefix.iterdir()):
                    prefix.rmdir()
        return (removed, kept)


class NullCache(CacheStore):
    """A cache that never hits and never stores (--no-cache)."""

    def __init__(self) -> None:
        super().__init__(directory=Path(os.devnull))

    def get(self, digest: str) -> dict | None:
        self.misses += 1
        return None

    def put(self, digest: str, payload: dict) -> None:
        pass
