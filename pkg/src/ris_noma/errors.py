"""Exception hierarchy shared by all ris-noma modules."""

from typing import Any, Dict, Optional


class RisNomaError(Exception):
    """Base class for every error raised by this package."""


class DomainError(RisNomaError, ValueError):
    """An argument lies outside the domain an operation is defined on."""


class DimensionError(DomainError):
    """Array shapes passed to an operation are mutually inconsistent."""


class EnumerationCapError(DomainError):
    """A discrete profile enumeration would exceed the configured cap."""

    def __init__(self, size: int, cap: int):
        self.size = size
        self.cap = cap
        msg = (
            f"Profile enumeration of size {size} exceeds the cap of {cap}; "
            "use ContinuousSampled mode or raise the cap"
        )
        super().__init__(msg)


class InfeasibleError(RisNomaError):
    """An optimization problem has no feasible point.

    ``report`` carries the numbers that explain the infeasibility, e.g. the
    time-share deficit of a minimum-rate constraint set.
    """

    def __init__(self, message: str, report: Optional[Dict[str, Any]] = None):
        self.report = report or {}
        super().__init__(message)


class IncompatibleArtifactsError(RisNomaError):
    """Artifacts handed to a comparison do not describe the same experiment."""


class ConfigError(RisNomaError):
    """An experiment configuration failed validation.

    ``field_errors`` maps dotted field paths to messages.
    """

    def __init__(self, message: str, field_errors: Optional[Dict[str, str]] = None):
        self.field_errors = field_errors or {}
        super().__init__(message)

    def __str__(self) -> str:
        if not self.field_errors:
            return super().__str__()
        lines = [super().__str__()]
        lines.extend(f"  {path}: {text}" for path, text in self.field_errors.items())
        return "\n".join(lines)
