"""Shared exception types."""

from __future__ import annotations


class PascalError(Exception):
    """Base class for library-specific failures."""


class IllConditioned(PascalError):
    """A Gram matrix is too ill-conditioned to invert reliably."""

    def __init__(self, condition: float):
        self.condition = condition
        super().__init__(f"Gram matrix condition estimate {condition:.3e} exceeds limit")


class Undefined(PascalError):
    """The error-free decision variable vanished; the SER bound is undefined."""


class BudgetExceeded(PascalError):
    """A closed-form sum would exceed the configured term budget."""

    def __init__(self, terms: int, budget: int):
        self.terms = terms
        self.budget = budget
        super().__init__(f"term count {terms} exceeds budget {budget}")


class ScenarioError(PascalError):
    """Scenario-file validation failure; carries location context."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
