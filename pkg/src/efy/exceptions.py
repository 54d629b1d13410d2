"""Exception types shared across the library."""


class ContractViolation(ValueError):
    """An argument violated a documented precondition."""


class EvaluationError(ArithmeticError):
    """A computation produced a non-finite value where a finite one is required."""


class SingularMatrixError(ArithmeticError):
    """Cholesky factorization hit a non-positive pivot."""

    def __init__(self, pivot: int, value: float):
        self.pivot = pivot
        self.value = value
        super().__init__(
            f"matrix is not positive definite: pivot {pivot} has value {value:.6e}"
        )


class InfeasibleError(ValueError):
    """The energy/regularizer pair does not admit a well-posed maximization."""


class DivergenceError(ArithmeticError):
    """A maximization is unbounded above (or an iterate escaped to infinity)."""


class DomainBoundaryError(ValueError):
    """Gradient requested at a point where it is undefined."""


class UnsupportedOperation(NotImplementedError):
    """No closed form is available; use the iterative oracle instead."""


class ParseError(ValueError):
    """Malformed dataset text; the message carries the line number."""


class TrainingDivergence(ArithmeticError):
    """Training hit a non-finite loss; the message names the sample index."""
