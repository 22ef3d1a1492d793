"""Exception hierarchy shared by all modules."""


class BerezinError(Exception):
    """Base class for library errors."""


class LayoutError(BerezinError, ValueError):
    """Jets with incompatible variable layouts, or an unknown variable."""


class ModeError(BerezinError, ValueError):
    """Mixing exact and float arithmetic within one operation."""


class PreconditionError(BerezinError, ValueError):
    """An operation's documented precondition does not hold."""


class InsufficientOrderError(PreconditionError):
    """A jet is not known to the order an operation requires.

    Attributes
    ----------
    required, available : int
        Needed and available orders (``available`` may be ``None``).
    """

    def __init__(self, message, required=None, available=None):
        super().__init__(message)
        self.required = required
        self.available = available


class InadmissibleBaseError(PreconditionError):
    """Base point outside the model's admissible domain."""


class ConditionError(PreconditionError):
    """Singular or ill-conditioned linear algebra."""
