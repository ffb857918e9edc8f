"""Exception taxonomy shared by every module and mapped to CLI exit codes."""


class BicombingError(Exception):
    """Base class. ``context`` carries machine-readable details."""

    code = "error"

    def __init__(self, message, **context):
        super().__init__(message)
        self.message = message
        self.context = context

    def to_dict(self):
        return {"code": self.code, "message": self.message, "context": self.context}


class SchemaError(BicombingError, ValueError):
    code = "schema"


class DomainError(BicombingError, ValueError):
    """Point or measure does not belong to the space it is used with."""

    code = "domain"


class RangeError(DomainError):
    code = "range"


class BudgetError(BicombingError):
    """A desk-scale resource cap was exceeded."""

    code = "budget"


class ConvergenceError(BicombingError):
    code = "convergence"


class PrecisionError(BudgetError):
    """Requested resolution lies below floating-point resolution."""

    code = "precision"
