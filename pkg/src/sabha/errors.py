"""Exception hierarchy."""


class SabhaError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(SabhaError, ValueError):
    """Input violates a documented precondition."""


class DegenerateInputError(InvalidInputError):
    """Input is well-formed but the requested statistic is undefined for it."""


class ParseError(InvalidInputError):
    """A data file could not be parsed.

    ``line`` is the 1-based line number of the offending row, when known.
    """

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class ConvergenceError(SabhaError, RuntimeError):
    """An iterative solver stopped before meeting its tolerances."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state

    @property
    def residuals(self):
        if self.state is None:
            return None
        return {"primal": self.state.primal_residual, "dual": self.state.dual_residual}
