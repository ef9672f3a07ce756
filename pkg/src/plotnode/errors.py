"""Exception hierarchy shared across the package."""

from __future__ import annotations


class PlotnodeError(Exception):
    """Base class for every error raised by plotnode."""


# --- narrative core -------------------------------------------------------


class NodeError(PlotnodeError, ValueError):
    pass


class EmptySubject(NodeError):
    pass


class EmptyVerb(NodeError):
    pass


# --- storyline ------------------------------------------------------------


class OutOfOrderChapter(PlotnodeError, ValueError):
    pass


# --- graph ----------------------------------------------------------------


class GraphError(PlotnodeError):
    pass


class DuplicateTimestamp(GraphError):
    pass


class AliasConflict(GraphError):
    pass


class UnknownEntity(GraphError, KeyError):
    pass


class UnsupportedFormat(GraphError, ValueError):
    pass


# --- llm gateway ----------------------------------------------------------


class GatewayError(PlotnodeError):
    pass


class UnknownTemplate(GatewayError, KeyError):
    pass


class MissingBinding(GatewayError, KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"missing binding for placeholder {self.name!r}"


class UnusedBinding(GatewayError, KeyError):
    def __init__(self, names: list[str]):
        super().__init__(names)
        self.names = names

    def __str__(self) -> str:
        return f"bindings not used by template: {', '.join(self.names)}"


class BackendExhausted(GatewayError):
    pass


class ScriptUnderrun(GatewayError):
    pass


class ParseFailure(GatewayError, ValueError):
    """Structured output could not be extracted; ``span`` holds the offending text."""

    def __init__(self, message: str, span: str = ""):
        super().__init__(message)
        self.span = span


# --- pipeline -------------------------------------------------------------


class PipelineError(PlotnodeError):
    pass


class EmptyGeneration(PipelineError):
    pass


class PlanCountMismatch(PipelineError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"expected {expected} chapter plans, got {got}")
        self.expected = expected
        self.got = got


class PipelineAborted(PipelineError):
    """A fatal stage error; ``project`` holds whatever was produced before it."""

    def __init__(self, cause: Exception, project):
        super().__init__(f"{type(cause).__name__}: {cause}")
        self.cause = cause
        self.project = project


# --- evaluation -----------------------------------------------------------


class EvalError(PlotnodeError, ValueError):
    pass


class EmptyText(EvalError):
    pass


class TextTooShort(EvalError):
    pass


class EmptyCorpus(EvalError):
    pass


class NoVerdictFound(EvalError):
    pass


class EmptyOutcomes(EvalError):
    pass


class ZeroVariance(EvalError):
    pass


class SampleLengthMismatch(EvalError):
    pass


class LengthMismatch(EvalError):
    pass


class EmptyInput(EvalError):
    pass


class FileUnreadable(EvalError, OSError):
    pass
