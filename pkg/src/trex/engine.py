"""Document-order command execution with mutation-aware caching.

The engine walks a scanned document stream, dispatches each command to
its registered handler, and decides per command whether the result may
be served from or stored into the on-disk cache. Cache keys mix the
engine version, a rolling digest of every state-mutating command seen
so far (seeded from the debuggee binary itself), and a canonical,
length-prefixed serialization of the call.
"""

from __future__ import annotations

import base64
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable

from .cache import ENGINE_VERSION, CacheStore, NullCache
from .errors import (
    DuplicateCommand,
    MalformedArgument,
    ModuleNotFound,
    NotStopped,
    PackageNotFound,
    TrexError,
    UnknownCommand,
)
from .scanner import (
    AUX_LINE_PREFIX,
    CommandCall,
    CommandSpec,
    DocumentStream,
    Passthrough,
    parse_aux_log,
    scan_document,
)
from .session import DebuggerSession, start_session

BUILTIN_PACKAGE = "built_in"
BUILTIN_MODULES = ("Core", "GDBEval", "Print", "SingleStepper")


# --- results and registry -------------------------------------------------


@dataclass
class CommandResult:
    """What executing one command produced.

    ``fragments`` maps output format ("html", "tex") to a spliceable
    fragment. ``diagnostics`` holds warning strings that must resurface
    even when the result is served from cache. ``call`` is attached by
    the engine; ``frame_sequence`` is set only by stepper commands.
    """

    fragments: dict[str, str]
    cacheable: bool = False
    diagnostics: list[str] = field(default_factory=list)
    call: CommandCall | None = None
    frame_sequence: Any = None


@dataclass(frozen=True)
class CommandDescriptor:
    """A registered command: scan shape plus execution policy.

    Exactly one of the policy flags applies: ``control`` commands steer
    the engine itself (never cached, never digested); ``mutating``
    commands advance the debugger and fold into the mutation digest;
    everything else is pure and eligible for caching when ``cacheable``.
    ``key_material`` adds provider-specific bytes (e.g. plugin code
    digests) into the cache key.
    """

    name: str
    spec: CommandSpec
    handler: Callable[["EngineState", CommandCall], CommandResult]
    cacheable: bool = False
    mutating: bool = False
    control: bool = False
    origin: str = BUILTIN_PACKAGE
    key_material: bytes = b""


# --- engine state ---------------------------------------------------------


def _initial_digest() -> bytes:
    return hashlib.sha256(b"trex:no-executable").digest()


@dataclass
class EngineState:
    doc_dir: Path
    output_format: str = "html"  # "html" | "latex-aux"
    dialect: str = "html"  # scanner dialect: "html" | "latex"
    gdb_path: str = "gdb"
    timeout: float = 30.0
    max_frames: int = 2000
    strict: bool = False
    cache: CacheStore = field(default_factory=NullCache)
    session: DebuggerSession | None = None
    session_factory: Callable[["EngineState", Path], DebuggerSession] | None = None
    imported_commands: dict[str, CommandDescriptor] = field(default_factory=dict)
    uncache_budget: float = 0
    mutation_history_digest: bytes = field(default_factory=_initial_digest)
    diagnostics: list[str] = field(default_factory=list)
    transcripts: list[tuple[str, list[dict]]] = field(default_factory=list)
    plugin_manifests: dict[str, Any] = field(default_factory=dict)
    plugin_handles: dict[str, Any] = field(default_factory=dict)
    executable: Path | None = None
    source_files: dict[str, str] = field(default_factory=dict)
    stepper_count: int = 0

    def fold_mutation(self, data: bytes) -> None:
        self.mutation_history_digest = hashlib.sha256(
            self.mutation_history_digest + data
        ).digest()

    def scan_table(self) -> dict[str, CommandSpec]:
        return {name: desc.spec for name, desc in self.imported_commands.items()}

    def require_session(self) -> DebuggerSession:
        if self.session is None:
            raise NotStopped(
                "no debuggee is loaded; \\setExecutable must come first"
            )
        return self.session

    def warn(self, message: str) -> None:
        if message not in self.diagnostics:
            self.diagnostics.append(message)

    def all_transcripts(self) -> list[tuple[str, list[dict]]]:
        out = list(self.transcripts)
        if self.session is not None:
            out.append((str(self.executable), self.session.transcript))
        return out

    def close(self) -> None:
        if self.session is not None:
            self.transcripts.append((str(self.executable), self.session.transcript))
            self.session.close()
            self.session = None
        for handle in self.plugin_handles.values():
            handle.close()
        self.plugin_handles.clear()


def new_state(doc_dir: str | Path, **kwargs: Any) -> EngineState:
    """An engine with every built-in module pre-imported."""
    state = EngineState(doc_dir=Path(doc_dir), **kwargs)
    _import_builtin_modules(state, BUILTIN_MODULES)
    return state


# --- cache keys -----------------------------------------------------------


def _lp(data: bytes) -> bytes:
    return b"%d:%s" % (len(data), data)


def canonical_call(call: CommandCall) -> bytes:
    """Canonical byte serialization of a call, length-prefixed throughout.

    Two calls serialize identically iff they have the same name,
    options (order-insensitive), arguments, and body.
    """
    parts = [b"name", _lp(call.name.encode())]
    parts.append(b"opts%d" % len(call.options))
    for key in sorted(call.options):
        parts.append(_lp(key.encode()))
        parts.append(_lp(call.options[key].encode()))
    parts.append(b"args%d" % len(call.args))
    for arg in call.args:
        parts.append(_lp(arg.encode()))
    if call.body is None:
        parts.append(b"nobody")
    else:
        parts.append(b"body")
        parts.append(_lp(call.body.encode()))
    return b"".join(parts)


def cache_key(state: EngineState, desc: CommandDescriptor, call: CommandCall) -> str:
    h = hashlib.sha256()
    h.update(_lp(ENGINE_VERSION.encode()))
    h.update(_lp(desc.key_material))
    h.update(_lp(state.mutation_history_digest))
    h.update(canonical_call(call))
    return h.hexdigest()


def _serialize_result(result: CommandResult) -> dict:
    return {
        "fragments": dict(result.fragments),
        "cacheable": True,
        "diagnostics": list(result.diagnostics),
    }


def _deserialize_result(entry: dict) -> CommandResult:
    return CommandResult(
        fragments=dict(entry["fragments"]),
        cacheable=True,
        diagnostics=list(entry.get("diagnostics", [])),
    )


# --- registration ---------------------------------------------------------


def register_command(state: EngineState, desc: CommandDescriptor) -> None:
    existing = state.imported_commands.get(desc.name)
    if existing is not None:
        if existing.origin == desc.origin:
            return  # re-import of the same provider is a no-op
        raise DuplicateCommand(
            f"command \\{desc.name} is provided by both "
            f"{existing.origin} and {desc.origin}"
        )
    state.imported_commands[desc.name] = desc


def _import_builtin_modules(state: EngineState, modules: Iterable[str]) -> None:
    from . import builtins as _builtins

    for module in modules:
        descriptors = _builtins.MODULES.get(module)
        if descriptors is None:
            known = ", ".join(sorted(_builtins.MODULES))
            raise ModuleNotFound(
                f"package {BUILTIN_PACKAGE} has no module {module!r} "
                f"(available: {known})"
            )
        for desc in descriptors:
            register_command(state, desc)


def _split_modules(modules_arg: str) -> list[str]:
    modules = [m.strip() for m in modules_arg.split(",")]
    if not modules or any(not m for m in modules):
        raise MalformedArgument(
            "\\trexInitialize expects a non-empty, comma-separated module list"
        )
    return modules


def trex_initialize(state: EngineState, package: str, modules_arg: str) -> None:
    """Import command modules from a package (built-in or plugin)."""
    modules = _split_modules(modules_arg)
    if package == BUILTIN_PACKAGE:
        _import_builtin_modules(state, modules)
        return
    from . import plugins as _plugins

    manifest = state.plugin_manifests.get(package)
    if manifest is None:
        manifest = _plugins.load_manifest(state.doc_dir, package)
        state.plugin_manifests[package] = manifest
    for module in modules:
        decls = manifest.modules.get(module)
        if decls is None:
            known = ", ".join(sorted(manifest.modules))
            raise ModuleNotFound(
                f"package {package} has no module {module!r} (available: {known})"
            )
        for decl in decls:
            register_command(
                state, _plugins.plugin_descriptor(manifest, module, decl)
            )


# --- document preparation (two-pass scan) ---------------------------------


def _collect_plugin_specs(
    state: EngineState, init_calls: Iterable[CommandCall]
) -> dict[str, CommandSpec]:
    """Scan-table additions for every plugin package a document imports."""
    from . import plugins as _plugins

    extra: dict[str, CommandSpec] = {}
    for call in init_calls:
        package = call.args[0]
        if package == BUILTIN_PACKAGE:
            continue
        manifest = state.plugin_manifests.get(package)
        if manifest is None:
            try:
                manifest = _plugins.load_manifest(state.doc_dir, package)
            except PackageNotFound as exc:
                raise exc.with_span(call.span)
            state.plugin_manifests[package] = manifest
        for module_decls in manifest.modules.values():
            for decl in module_decls:
                spec = CommandSpec(arity=decl.arity, takes_body=decl.takes_body)
                seen = extra.get(decl.name) or state.scan_table().get(decl.name)
                if seen is not None and seen != spec:
                    raise DuplicateCommand(
                        f"command \\{decl.name} is declared with conflicting "
                        f"shapes by multiple providers"
                    ).with_span(call.span)
                extra[decl.name] = spec
    return extra


def _validate_calls(stream: DocumentStream) -> DocumentStream:
    """Argument checks that must fail at parse time, before execution."""
    for call in stream.calls():
        if call.name == "uncache":
            try:
                _parse_uncache_budget(call.args[0])
            except MalformedArgument as exc:
                raise exc.with_span(call.span)
    return stream


def prepare_document(state: EngineState, text: str) -> DocumentStream:
    """Scan a source document, resolving plugin command shapes first.

    A lenient prescan finds \\trexInitialize calls so plugin manifests
    can contribute their command shapes before the real scan runs with
    the caller's strictness.
    """
    prescan = scan_document(text, state.dialect, state.scan_table(), strict=False)
    init_calls = [c for c in prescan.calls() if c.name == "trexInitialize"]
    table = dict(state.scan_table())
    table.update(_collect_plugin_specs(state, init_calls))
    return _validate_calls(
        scan_document(text, state.dialect, table, strict=state.strict)
    )


def prepare_aux(state: EngineState, text: str) -> DocumentStream:
    """Parse a recorded aux log, resolving plugin command shapes first."""
    init_spec = state.scan_table()["trexInitialize"]
    init_calls: list[CommandCall] = []
    for line in text.splitlines():
        line = line.strip()
        if not line.startswith(AUX_LINE_PREFIX):
            continue
        fields = line.split("!", 3)
        if len(fields) != 4:
            continue  # parse_aux_log reports malformed lines properly
        try:
            source = base64.b64decode(fields[3], validate=True).decode("utf-8")
        except Exception:
            continue
        found = scan_document(
            source, "latex", {"trexInitialize": init_spec}, strict=False
        )
        init_calls.extend(c for c in found.calls() if c.name == "trexInitialize")
    table = dict(state.scan_table())
    table.update(_collect_plugin_specs(state, init_calls))
    calls = parse_aux_log(text, table)
    return _validate_calls(
        DocumentStream(items=list(calls), dialect="latex", source=text)
    )


# --- execution ------------------------------------------------------------


def execute_call(
    state: EngineState, call: CommandCall, cache: CacheStore | None = None
) -> CommandResult:
    cache = cache if cache is not None else state.cache
    desc = state.imported_commands.get(call.name)
    if desc is None:
        raise UnknownCommand(
            f"\\{call.name} is not imported at this point in the document",
            span=call.span,
        )
    try:
        if desc.control or desc.mutating:
            result = desc.handler(state, call)
            if desc.mutating:
                state.fold_mutation(canonical_call(call))
        elif desc.cacheable:
            key = cache_key(state, desc, call)
            if state.uncache_budget > 0:
                state.uncache_budget -= 1
                result = desc.handler(state, call)
                if result.cacheable:
                    cache.put(key, _serialize_result(result))
            else:
                entry = cache.get(key)
                if entry is not None:
                    result = _deserialize_result(entry)
                else:
                    result = desc.handler(state, call)
                    if result.cacheable:
                        cache.put(key, _serialize_result(result))
        else:
            result = desc.handler(state, call)
    except TrexError as exc:
        raise exc.with_span(call.span)
    result.call = call
    for warning in result.diagnostics:
        state.warn(warning)
    return result


def execute_stream(
    state: EngineState, stream: DocumentStream, cache: CacheStore | None = None
) -> list[Passthrough | CommandResult]:
    """Execute every command in document order; passthrough text flows
    through untouched."""
    out: list[Passthrough | CommandResult] = []
    for item in stream.items:
        if isinstance(item, CommandCall):
            out.append(execute_call(state, item, cache))
        else:
            out.append(item)
    return out


# --- control command handlers (registered via builtins.Core) --------------


def handle_trex_initialize(state: EngineState, call: CommandCall) -> CommandResult:
    trex_initialize(state, call.args[0], call.args[1])
    return CommandResult(fragments={"html": "", "tex": ""})


def _parse_uncache_budget(raw: str) -> float:
    text = raw.strip()
    if text == "inf":
        return math.inf
    try:
        budget = int(text)
    except ValueError:
        budget = 0
    if budget < 1:
        raise MalformedArgument(
            f"\\uncache expects a positive count or inf, got {raw!r}"
        )
    return budget


def handle_uncache(state: EngineState, call: CommandCall) -> CommandResult:
    state.uncache_budget = _parse_uncache_budget(call.args[0])
    return CommandResult(fragments={"html": "", "tex": ""})
