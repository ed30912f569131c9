"""Exception hierarchy for knownmix. Every error carries the CLI exit code it maps to."""

from typing import Optional


class KnownMixError(Exception):
    exit_code = 1


class ConfigurationError(KnownMixError):
    """Invalid known-spec, scenario name or flag value."""

    exit_code = 2


class IngestionError(KnownMixError):
    """A row could not be parsed or holds a non-finite value."""

    exit_code = 3

    def __init__(self, message: str, row: Optional[int] = None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class NumericOverflowError(KnownMixError):
    exit_code = 3

    def __init__(self, monomial: str):
        super().__init__(f"moment {monomial} overflowed to a non-finite value")
        self.monomial = monomial


class DegenerateDesign(KnownMixError):
    """Singular or ill-conditioned least-squares design."""

    exit_code = 4

    def __init__(self, message: str, condition: Optional[float] = None):
        if condition is not None:
            message = f"{message} (condition number {condition:.3g})"
        super().__init__(message)
        self.condition = condition


class OutsideDomain(KnownMixError):
    """γ_n lies outside the set where the (α, β, π) maps are defined, or π_n = 0."""

    exit_code = 5


class GuardTripped(KnownMixError):
    """π_n ∉ (0, 1] and the caller did not force the functional estimates."""

    exit_code = 6
