"""Exception hierarchy.

Two families matter to callers: :class:`ValidationError` for bad input
(the CLI maps it to exit code 2) and :class:`CertificationError` for a
numeric procedure that ran but could not certify its result (exit code 3).
"""


class WalksolverError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(WalksolverError, ValueError):
    """Input violates a documented precondition."""


class GraphFormatError(ValidationError):
    """A graph file could not be parsed.

    ``line`` is the 1-based line (text format) or edge index (JSON format)
    where the problem was found, when one applies.
    """

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class NotEulerianError(ValidationError):
    """Some vertex has in-degree different from its out-degree."""


class InadmissibleError(ValidationError):
    """A matrix is outside the class on which approximation is defined."""


class CertificationError(WalksolverError):
    """A numeric procedure could not certify its output."""


class ChainBudgetError(CertificationError):
    """Measured per-level approximation errors exceed the chain budget."""


class ConvergenceError(CertificationError):
    """Richardson contraction factor is not below one."""


class BoundError(CertificationError):
    """The entrywise error bound could not be driven below the target."""


class ExpanderError(CertificationError):
    """No expander candidate met the requested spectral bound."""
