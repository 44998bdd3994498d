"""Out-of-process command providers.

A plugin package is a directory next to the document containing a
``trexpkg.toml`` manifest. The manifest declares the wire protocol
version, how to start the provider process, and which commands each
module contributes. The host speaks newline-delimited JSON over the
provider's stdin/stdout:

  provider -> host   {"type": "handshake", "protocol": 1}      (first)
  host -> provider   {"type": "request", "id", "command",
                      "options", "args", "body"}
  provider -> host   {"type": "callback", "id", "op", "payload"}   (any
                     number, mid-request; op is eval | frames | graph)
  host -> provider   {"type": "callback-result", "id", "ok",
                      "value" | "error"}
  provider -> host   {"type": "response", "id",
                      "fragments": {"html"?, "tex"?}, "cache": bool}
                  or {"type": "error", "id", "message"}

One provider process serves all of its package's commands and is
reused across requests; it is started lazily, on the first request
that actually needs it — a fully cached build never spawns it.
"""

from __future__ import annotations

import json
import queue
import subprocess
import sys
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import tomli

from .engine import CommandDescriptor, CommandResult, EngineState
from .errors import (
    EvalError,
    GraphError,
    HandshakeVersionMismatch,
    NotStopped,
    PackageNotFound,
    PluginCrashed,
    PluginError,
    ProtocolViolation,
)
from .graph import graph_doc_from_dict, render_svg, render_tikz, resolve_layout
from .scanner import CommandCall, CommandSpec

PROTOCOL_VERSION = 1
MANIFEST_NAME = "trexpkg.toml"
_EOF = object()


@dataclass(frozen=True)
class PluginCommandDecl:
    name: str
    arity: int
    takes_body: bool = False


@dataclass
class PluginManifest:
    package: str
    directory: Path
    protocol: int
    command: list[str]
    modules: dict[str, list[PluginCommandDecl]]
    digest: bytes = b""


def _manifest_digest(directory: Path, manifest_bytes: bytes, argv: list[str]) -> bytes:
    """Digest of the plugin's manifest and program files, so editing the
    plugin invalidates its cached results."""
    import hashlib

    h = hashlib.sha256()
    h.update(manifest_bytes)
    for part in argv:
        candidate = directory / part
        if candidate.is_file():
            h.update(candidate.read_bytes())
    return h.digest()


def load_manifest(doc_dir: str | Path, package: str) -> PluginManifest:
    directory = Path(doc_dir) / package
    path = directory / MANIFEST_NAME
    if not path.is_file():
        raise PackageNotFound(
            f"package {package!r} not found: no {directory / MANIFEST_NAME}"
        )
    raw = path.read_bytes()
    try:
        data = tomli.loads(raw.decode("utf-8"))
    except (tomli.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise PackageNotFound(f"package {package!r} has a malformed manifest: {exc}")

    meta = data.get("package", {})
    protocol = meta.get("protocol")
    if not isinstance(protocol, int):
        raise PackageNotFound(
            f"package {package!r} manifest must declare an integer "
            f"package.protocol"
        )
    if protocol != PROTOCOL_VERSION:
        raise HandshakeVersionMismatch(
            f"package {package!r} declares protocol {protocol}; this host "
            f"speaks {PROTOCOL_VERSION}"
        )
    command = meta.get("command")
    if (
        not isinstance(command, list)
        or not command
        or not all(isinstance(p, str) for p in command)
    ):
        raise PackageNotFound(
            f"package {package!r} manifest must declare package.command "
            f"as a non-empty list of strings"
        )

    modules: dict[str, list[PluginCommandDecl]] = {}
    for mod_name, mod_data in data.get("module", {}).items():
        decls: list[PluginCommandDecl] = []
        for entry in mod_data.get("commands", []):
            name = entry.get("name")
            arity = entry.get("arity")
            if not isinstance(name, str) or not isinstance(arity, int) or arity < 0:
                raise PackageNotFound(
                    f"package {package!r} declares a malformed command "
                    f"in module {mod_name!r}: {entry!r}"
                )
            decls.append(
                PluginCommandDecl(
                    name=name, arity=arity, takes_body=bool(entry.get("body", False))
                )
            )
        modules[mod_name] = decls
    if not modules:
        raise PackageNotFound(f"package {package!r} declares no command modules")

    return PluginManifest(
        package=package,
        directory=directory,
        protocol=protocol,
        command=list(command),
        modules=modules,
        digest=_manifest_digest(directory, raw, command),
    )


# --- the provider process ---------------------------------------------------


class PluginHandle:
    """One running provider process, shared by all its commands."""

    def __init__(self, manifest: PluginManifest, timeout: float = 30.0) -> None:
        self.manifest = manifest
        self.timeout = timeout
        self._next_id = 0
        self._stderr: list[str] = []
        argv = [self._resolve(part) for part in manifest.command]
        try:
            self._proc = subprocess.Popen(
                argv,
                cwd=str(manifest.directory),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                errors="replace",
                bufsize=1,
            )
        except OSError as exc:
            raise PluginCrashed(
                f"plugin {manifest.package!r} failed to start: {exc}"
            )
        self._lines: queue.Queue = queue.Queue()
        threading.Thread(target=self._read_stdout, daemon=True).start()
        threading.Thread(target=self._read_stderr, daemon=True).start()
        self._handshake()

    def _resolve(self, part: str) -> str:
        candidate = self.manifest.directory / part
        if candidate.is_file():
            return str(candidate)
        if part in ("python", "python3"):
            return sys.executable
        return part

    def _read_stdout(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(_EOF)

    def _read_stderr(self) -> None:
        assert self._proc.stderr is not None
        for line in self._proc.stderr:
            self._stderr.append(line)

    def stderr_text(self) -> str:
        return "".join(self._stderr)

    def _crashed(self, context: str) -> PluginCrashed:
        self.close()
        detail = self.stderr_text().strip()
        message = f"plugin {self.manifest.package!r} crashed {context}"
        if detail:
            message += f"; stderr:\n{detail}"
        return PluginCrashed(message, stderr=self.stderr_text())

    def _recv(self, deadline: float, context: str) -> dict:
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            self.close()
            raise PluginError(
                f"plugin {self.manifest.package!r} sent no response within "
                f"{self.timeout:g}s {context}"
            )
        try:
            line = self._lines.get(timeout=remaining)
        except queue.Empty:
            self.close()
            raise PluginError(
                f"plugin {self.manifest.package!r} sent no response within "
                f"{self.timeout:g}s {context}"
            )
        if line is _EOF:
            raise self._crashed(context)
        try:
            msg = json.loads(line)
        except json.JSONDecodeError:
            self.close()
            raise ProtocolViolation(
                f"plugin {self.manifest.package!r} sent a non-JSON line "
                f"{context}: {line.strip()!r}"
            )
        if not isinstance(msg, dict) or not isinstance(msg.get("type"), str):
            self.close()
            raise ProtocolViolation(
                f"plugin {self.manifest.package!r} sent a malformed message "
                f"{context}: {line.strip()!r}"
            )
        return msg

    def _send(self, msg: dict) -> None:
        assert self._proc.stdin is not None
        try:
            self._proc.stdin.write(json.dumps(msg) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError):
            raise self._crashed("while receiving a request")

    def _handshake(self) -> None:
        deadline = time.monotonic() + self.timeout
        msg = self._recv(deadline, "during handshake")
        if msg.get("type") != "handshake":
            self.close()
            raise ProtocolViolation(
                f"plugin {self.manifest.package!r} must open with a "
                f"handshake message, got {msg.get('type')!r}"
            )
        protocol = msg.get("protocol")
        if protocol != PROTOCOL_VERSION:
            self.close()
            raise HandshakeVersionMismatch(
                f"plugin {self.manifest.package!r} speaks protocol "
                f"{protocol!r}; this host speaks {PROTOCOL_VERSION}"
            )

    # -- request dispatch --

    def dispatch(self, state: EngineState, call: CommandCall) -> CommandResult:
        rid = self._next_id
        self._next_id += 1
        self._send(
            {
                "type": "request",
                "id": rid,
                "command": call.name,
                "options": dict(call.options),
                "args": list(call.args),
                "body": call.body,
            }
        )
        deadline = time.monotonic() + self.timeout
        context = f"while handling \\{call.name}"
        while True:
            msg = self._recv(deadline, context)
            kind = msg["type"]
            if msg.get("id") != rid:
                self.close()
                raise ProtocolViolation(
                    f"plugin {self.manifest.package!r} answered request "
                    f"{rid} with id {msg.get('id')!r}"
                )
            if kind == "callback":
                self._send(
                    {
                        "type": "callback-result",
                        "id": rid,
                        **self._run_callback(state, msg),
                    }
                )
                continue
            if kind == "response":
                return self._parse_response(msg, call)
            if kind == "error":
                message = msg.get("message")
                raise PluginError(
                    f"plugin {self.manifest.package!r} failed \\{call.name}: "
                    f"{message if isinstance(message, str) else msg!r}"
                )
            self.close()
            raise ProtocolViolation(
                f"plugin {self.manifest.package!r} sent unexpected message "
                f"type {kind!r} {context}"
            )

    def _parse_response(self, msg: dict, call: CommandCall) -> CommandResult:
        fragments = msg.get("fragments")
        if not isinstance(fragments, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in fragments.items()
        ):
            self.close()
            raise ProtocolViolation(
                f"plugin {self.manifest.package!r} response to \\{call.name} "
                f"carries no fragments mapping"
            )
        return CommandResult(
            fragments=dict(fragments), cacheable=bool(msg.get("cache", False))
        )

    def _run_callback(self, state: EngineState, msg: dict) -> dict:
        op = msg.get("op")
        payload = msg.get("payload") or {}
        try:
            if op == "eval":
                session = state.require_session()
                return {"ok": True, "value": session.evaluate(payload["expr"])}
            if op == "frames":
                session = state.require_session()
                return {
                    "ok": True,
                    "value": [
                        {
                            "level": f.level,
                            "function": f.function,
                            "file": f.location.file,
                            "line": f.location.line,
                        }
                        for f in session.list_frames()
                    ],
                }
            if op == "graph":
                doc = graph_doc_from_dict(payload["graph"])
                resolved = resolve_layout(doc)
                return {
                    "ok": True,
                    "value": {
                        "svg": render_svg(resolved),
                        "tikz": render_tikz(resolved),
                    },
                }
        except (EvalError, NotStopped, GraphError, KeyError, TypeError) as exc:
            return {"ok": False, "error": f"{type(exc).__name__}: {exc}"}
        self.close()
        raise ProtocolViolation(
            f"plugin {self.manifest.package!r} requested unknown callback "
            f"op {op!r}"
        )

    def close(self) -> None:
        proc = self._proc
        if proc.poll() is None:
            try:
                if proc.stdin is not None:
                    proc.stdin.close()
            except OSError:
                pass
            try:
                proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait(timeout=5)


# --- registration glue ------------------------------------------------------


def plugin_descriptor(
    manifest: PluginManifest, module: str, decl: PluginCommandDecl
) -> CommandDescriptor:
    def handler(state: EngineState, call: CommandCall) -> CommandResult:
        handle = state.plugin_handles.get(manifest.package)
        if handle is None:
            handle = PluginHandle(manifest, timeout=state.timeout)
            state.plugin_handles[manifest.package] = handle
        return handle.dispatch(state, call)

    return CommandDescriptor(
        name=decl.name,
        spec=CommandSpec(arity=decl.arity, takes_body=decl.takes_body),
        handler=handler,
        cacheable=True,
        origin=f"{manifest.package}.{module}",
        key_material=manifest.digest,
    )
