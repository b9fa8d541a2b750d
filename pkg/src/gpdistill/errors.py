"""Exception types shared across the package."""


class ContractError(ValueError):
    """An input violates a documented precondition (shape, range, dimension)."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (non-finite values, failed factorization)."""


class FactorizationError(NumericalError):
    """Cholesky factorization hit a non-positive pivot."""

    def __init__(self, pivot, message=None):
        self.pivot = pivot
        if message is None:
            message = f"Cholesky factorization failed: non-positive pivot at index {pivot}"
        super().__init__(message)
