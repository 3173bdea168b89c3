"""Exception hierarchy shared by every mmqr module.

Each class carries a short ``category`` string; the command-line front end
prints it so that scripts can branch on the failure kind.
"""


class MMQRError(Exception):
    category = "error"


class DomainError(MMQRError, ValueError):
    """An argument lies outside the domain of the operation."""

    category = "domain"


class SingularMatrixError(MMQRError, ArithmeticError):
    """A system that must be positive definite failed to factorize.

    ``pivot`` is the zero-based index of the first failing pivot, when known.
    """

    category = "singular"

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class DegenerateFitError(MMQRError, ValueError):
    """A fit produced a state where a downstream quantity is undefined."""

    category = "degenerate"


class NumericError(MMQRError, ArithmeticError):
    """An iterative numeric routine failed to converge or bracket a root."""

    category = "numeric"


class ParseError(MMQRError, ValueError):
    category = "parse"
