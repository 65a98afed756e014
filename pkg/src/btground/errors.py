"""Exception hierarchy shared by every btground module."""

from __future__ import annotations

from typing import Any


class BTGroundError(Exception):
    """Base class for all library errors."""


class DomainError(BTGroundError, ValueError):
    """Inputs do not belong to the same universe, or reference unknown ids."""


class PreconditionError(BTGroundError):
    """An action model was applied in a state that violates its precondition."""


class ResourceError(BTGroundError):
    """A configured budget (expansions, enumeration cap, state guard) was exceeded.

    ``context`` carries whatever partial result the caller can still use, e.g.
    the partial planning context when the planner runs out of expansions.
    """

    def __init__(self, message: str, context: Any = None):
        super().__init__(message)
        self.context = context


class UnsatisfiableScenarioError(BTGroundError):
    """No scenario can satisfy the requested precondition under the mutex groups."""


class ParseError(BTGroundError):
    """Syntax or semantic error in a domain, task-set, BT or results file."""

    def __init__(self, message: str, line: int = 0, column: int = 0, source: str = "<text>"):
        self.message = message
        self.line = line
        self.column = column
        self.source = source
        super().__init__(f"{source}:{line}:{column}: {message}")


class ProtocolError(BTGroundError):
    """An external proposer timed out, exited, or sent a malformed record."""


class HiddenFieldAccess(BTGroundError):
    """Raised in redact mode when grounding code touches a policy's hidden transition."""
