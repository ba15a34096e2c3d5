"""Exception hierarchy shared by all modules.

Validation problems (bad input, violated invariants) and numerical
failures (infeasible solves, diverged fits) are kept apart so the CLI can
map them to distinct exit codes.
"""


class QatScaleError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(QatScaleError, ValueError):
    """Input violates a documented precondition or invariant."""


class RecordParseError(ValidationError):
    """A record file row could not be parsed.

    ``row`` is the zero-based data row index (header excluded) and
    ``field`` the offending column name, when known.
    """

    def __init__(self, message: str, row: int | None = None, field: str | None = None):
        self.row = row
        self.field = field
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if field is not None:
            loc.append(f"field '{field}'")
        prefix = f"{', '.join(loc)}: " if loc else ""
        super().__init__(prefix + message)


class DomainError(ValidationError):
    """A law was evaluated outside its domain (non-positive inputs, s_total <= 1)."""


class DegenerateLawError(ValidationError):
    """Law parameters make the requested optimum ill-defined."""


class NumericalError(QatScaleError, RuntimeError):
    """A solver could not produce a result."""


class InfeasibleError(NumericalError):
    """The requested target cannot be reached by any admissible input."""


class FitError(NumericalError):
    """Every restart of a fit diverged."""
