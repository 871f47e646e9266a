"""Exception types raised across the package."""


class InvalidInputError(ValueError):
    """Argument shape, value or finiteness violates an operation's contract."""


class SingularMatrixError(ArithmeticError):
    """A matrix expected to be positive definite is numerically singular."""


class DegenerateChannelError(ArithmeticError):
    """A channel (or its estimate) is identically zero where structure is required."""


class DegenerateProjectionError(ArithmeticError):
    """A cooperative-feedback projection collapsed to (almost) zero."""


class SearchSpaceError(RuntimeError):
    """Exhaustive search would exceed the configured evaluation budget."""

    def __init__(self, required: int, budget: int):
        self.required = required
        self.budget = budget
        super().__init__(
            f"exhaustive search needs {required} evaluations, budget is {budget}"
        )
