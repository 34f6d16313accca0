"""Domain errors. Every error carries a stable, machine-greppable code."""

from __future__ import annotations


class CausalTextError(Exception):
    """Base class for all domain errors raised by this package."""

    code = "error"

    def __init__(self, message: str, *, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code


class GraphParseError(CausalTextError):
    code = "graph-parse"


class GraphValidationError(CausalTextError):
    code = "graph-invalid"


class DecompositionError(CausalTextError):
    code = "decompose"


class LinearizationError(CausalTextError):
    code = "linearize"


class LinearizedParseError(CausalTextError):
    code = "linearized-parse"


class PairsError(CausalTextError):
    code = "pairs"


class PromptError(CausalTextError):
    code = "prompt"


class BudgetError(CausalTextError):
    """Assembled prompt exceeds the configured context budget."""

    code = "context-budget"


class SplitError(CausalTextError):
    code = "split"


class BackendError(CausalTextError):
    code = "backend"


class AuthError(BackendError):
    code = "auth-missing"


class RetryExhaustedError(BackendError):
    code = "retry-exhausted"


class ReplayMissError(BackendError):
    code = "replay-miss"


class MetricError(CausalTextError):
    code = "metric"


class AdapterError(CausalTextError):
    code = "adapter"


class RunnerError(CausalTextError):
    code = "runner"


class SessionError(CausalTextError):
    code = "session"


class UnknownTaskError(SessionError):
    code = "unknown-task"


class DuplicateLabelError(SessionError):
    code = "duplicate-label"
