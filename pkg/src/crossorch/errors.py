"""Exception hierarchy shared by every layer of the orchestrator.

Each exception exposes a ``kind`` string. Kinds travel inside step results and
transcripts, so they are stable identifiers rather than free text.
"""

from __future__ import annotations


class OrchestrationError(Exception):
    """Base class; ``kind`` defaults to the class name."""

    kind: str = "OrchestrationError"

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        if "kind" not in cls.__dict__:
            cls.kind = cls.__name__


class ParseError(OrchestrationError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(OrchestrationError):
    pass


class ConfigError(OrchestrationError):
    pass


# --- llm gateway -----------------------------------------------------------

class BackendFailure(OrchestrationError):
    pass


class NoScriptMatch(BackendFailure):
    pass


class TransportError(BackendFailure):
    pass


class NonSuccessStatus(BackendFailure):
    def __init__(self, status: int, body: str = ""):
        self.status = status
        super().__init__(f"HTTP {status}: {body[:200]}")


class MalformedResponse(BackendFailure):
    pass


class AmbiguousTrigger(OrchestrationError):
    pass


# --- agent runtime ---------------------------------------------------------

class UnknownRole(OrchestrationError):
    pass


class UnparseablePlan(OrchestrationError):
    pass


# --- tool registry / action scripts -----------------------------------------

class DuplicateTool(OrchestrationError):
    pass


class ActionScriptError(OrchestrationError):
    """Raised while parsing or binding an action script."""


class ScriptSyntaxError(ActionScriptError, ParseError):
    kind = "SyntaxError"


class UnknownTool(ActionScriptError):
    pass


class ArityMismatch(ActionScriptError):
    pass


class UndefinedBinding(ActionScriptError):
    pass


class TypeMismatch(ActionScriptError):
    pass


# --- optical domain ----------------------------------------------------------

class NotLoaded(OrchestrationError):
    pass


class InvalidEndpoints(OrchestrationError):
    pass


class NoPath(OrchestrationError):
    pass


class InvalidPath(OrchestrationError):
    pass


class EmptyCandidates(OrchestrationError):
    pass


class NotEvaluated(OrchestrationError):
    pass


# --- robot domain --------------------------------------------------------------

class RobotError(OrchestrationError):
    pass


class UnknownPort(RobotError):
    pass


class OutOfWorkspace(RobotError):
    pass


class NotAtPort(RobotError):
    pass


class PortEmpty(RobotError):
    pass


class HandsFull(RobotError):
    pass


class PortOccupied(RobotError):
    pass


class NotHoldingFiber(RobotError):
    pass


ROBOT_ERROR_KINDS = frozenset(
    cls.kind
    for cls in (UnknownPort, OutOfWorkspace, NotAtPort, PortEmpty, HandsFull,
                PortOccupied, NotHoldingFiber)
)


# --- bridge --------------------------------------------------------------------

class UnknownGroup(OrchestrationError):
    pass


class UnmappedPort(OrchestrationError):
    pass


class QueueFull(OrchestrationError):
    pass
