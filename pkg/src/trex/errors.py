"""Error hierarchy shared across the build pipeline.

Every error that can be traced back to a place in the source document
carries a byte-offset span so the CLI can report file:line:col.
"""

from __future__ import annotations


class TrexError(Exception):
    """Base class for all build-failing errors."""

    def __init__(self, message: str, *, span: tuple[int, int] | None = None):
        super().__init__(message)
        self.message = message
        self.span = span

    def with_span(self, span: tuple[int, int] | None) -> "TrexError":
        """Attach a document span if none is set yet (errors bubble up
        from layers that do not know document positions)."""
        if self.span is None and span is not None:
            self.span = span
        return self


# --- document scanning -------------------------------------------------

class ScanError(TrexError):
    pass


class UnbalancedBraces(ScanError):
    pass


class MissingArgument(ScanError):
    pass


class MalformedOptions(ScanError):
    pass


class UnknownCommand(ScanError):
    """Raised for unrecognized backslash-commands in --strict mode only."""


class LocationSpecError(TrexError):
    pass


class EmptySpec(LocationSpecError):
    pass


class MalformedRange(LocationSpecError):
    pass


class AuxLogError(TrexError):
    def __init__(self, message: str, *, line_no: int | None = None):
        super().__init__(message)
        self.line_no = line_no


class MalformedAuxLine(AuxLogError):
    pass


class NonContiguousIndices(AuxLogError):
    pass


# --- debugger protocol and session -------------------------------------

class MIGrammarError(TrexError):
    """A line on the debugger's machine-interface channel did not parse.

    ``offset`` is the character position where parsing failed.
    """

    def __init__(self, message: str, *, offset: int = 0):
        super().__init__(message)
        self.offset = offset


class DebuggerError(TrexError):
    pass


class SpawnFailure(DebuggerError):
    pass


class DebuggerTimeout(DebuggerError):
    pass


class SessionDead(DebuggerError):
    pass


class NotStopped(DebuggerError):
    pass


class UnreachableLocation(DebuggerError):
    """The program finished before reaching the requested location."""

    def __init__(self, message: str, *, exit_code: int | None = None):
        super().__init__(message)
        self.exit_code = exit_code


class UnbreakableLine(DebuggerError):
    pass


class UnexpectedStop(DebuggerError):
    """The program stopped for a reason the driver did not ask for
    (e.g. a signal)."""


class EvalError(DebuggerError):
    pass


class FrameLimitExceeded(DebuggerError):
    pass


class ReplayMismatch(DebuggerError):
    """Replay transport got a command that differs from the recording."""


# --- command engine -----------------------------------------------------

class EngineError(TrexError):
    pass


class MalformedArgument(EngineError):
    pass


class NonIntegerValue(EngineError):
    pass


class SourceFileNotFound(EngineError):
    pass


class RangeOutOfBounds(EngineError):
    pass


class PackageNotFound(EngineError):
    pass


class ModuleNotFound(EngineError):
    pass


class DuplicateCommand(EngineError):
    pass


# --- plugin host ---------------------------------------------------------

class PluginError(TrexError):
    pass


class HandshakeVersionMismatch(PluginError):
    pass


class PluginCrashed(PluginError):
    def __init__(self, message: str, *, stderr: str = ""):
        super().__init__(message)
        self.stderr = stderr


class ProtocolViolation(PluginError):
    pass


# --- graph layout ---------------------------------------------------------

class GraphError(TrexError):
    pass


class DuplicateNodeId(GraphError):
    pass


class DanglingReference(GraphError):
    pass


class CyclicPlacement(GraphError):
    def __init__(self, message: str, *, cycle: list[str] | None = None):
        super().__init__(message)
        self.cycle = cycle or []


class SelfLoopEdge(GraphError):
    pass


# --- rendering ------------------------------------------------------------

class MissingFragment(TrexError):
    pass


class IOFailure(TrexError):
    pass
