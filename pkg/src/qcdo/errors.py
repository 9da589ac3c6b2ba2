"""Exception hierarchy shared by every module of the engine."""


class QcdoError(Exception):
    """Base class for all engine errors."""


class ValidationError(QcdoError, ValueError):
    """An input violates a documented invariant.

    ``field`` optionally names the offending field using a dotted path
    (``portfolio.assets[0].correlation``) so config errors can point at it.
    """

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}" if field else message)


class QubitError(ValidationError):
    """A gate or register refers to qubits it cannot use."""


class QubitBudgetError(QcdoError):
    """A requested simulation would exceed the statevector memory budget."""

    def __init__(self, required: int, limit: int, what: str = "circuit"):
        self.required = required
        self.limit = limit
        super().__init__(
            f"{what} needs {required} qubits, above the simulator limit of {limit}"
        )


class ConvergenceError(QcdoError):
    """A numerical root search failed to bracket or converge."""
