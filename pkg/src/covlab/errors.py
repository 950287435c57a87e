"""Exception types shared across the package."""


class CovlabError(Exception):
    """Base class for errors raised by covlab."""


class InvalidArgument(CovlabError, ValueError):
    """An argument is non-finite, out of its domain, or malformed."""


class OutOfRange(CovlabError, IndexError):
    """An index runs past the end of a finite sequence."""


class DegenerateDenominator(CovlabError, ArithmeticError):
    """A ball carries the full mass, so 1 - mu(B) vanishes."""


class BudgetExceeded(CovlabError, RuntimeError):
    """An exact enumeration or summation would exceed its work budget."""


class PreconditionFailed(CovlabError, ValueError):
    """Inputs are valid on their own but violate an operation's precondition."""
