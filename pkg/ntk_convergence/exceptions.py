import math
from typing import Any, Dict, Optional


class ConvergenceLabError(Exception):
    """Base exception for all training and verification errors."""
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.details = details


class ErrorResponse:
    def __init__(self, error: Exception):
        self.error_type = error.__class__.__name__
        self.message = str(error)
        self.details = getattr(error, 'details', None)

    def to_dict(self) -> dict:
        return {
            'error': {
                'type': self.error_type,
                'message': self.message,
                'details': self.details
            }
        }


class ValidationError(ConvergenceLabError):
    """Raised when an input violates a shape, range or dataset assumption."""

    pass


class UnsupportedActivationError(ConvergenceLabError):
    """Raised when an operation needs derivatives the activation cannot supply."""
    def __init__(self, operation: str, activation: str):
        self.operation = operation
        self.activation = activation
        super().__init__(
            f"{operation} does not support activation '{activation}'",
            details={'operation': operation, 'activation': activation}
        )


class UnsupportedDerivativeError(ConvergenceLabError):
    """Raised when a derivative order is requested that the activation does not define."""
    def __init__(self, activation: str, order: int):
        self.activation = activation
        self.order = order
        super().__init__(
            f"Derivative of order {order} is not available for '{activation}'",
            details={'activation': activation, 'order': order}
        )


class CatalogError(ConvergenceLabError):
    """Raised when a PDE instance name is not in the built-in catalog."""
    def __init__(self, name: str, known: list):
        self.name = name
        super().__init__(
            f"Unknown PDE instance '{name}' (known: {', '.join(known)})",
            details={'name': name, 'known': list(known)}
        )


class ConfigError(ConvergenceLabError):
    """Raised when a run configuration is missing, mistyped or unknown."""
    def __init__(self, key: str, message: str, line: Optional[int] = None):
        self.key = key
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(
            f"{where}{message} (key '{key}')",
            details={'key': key, 'line': line}
        )


class NumericalError(ConvergenceLabError):
    """Base class for failures of the numerical pipeline (exit status 4)."""

    pass


class NonFiniteError(NumericalError):
    """Raised when a function evaluation produces a non-finite value."""

    pass


class SingularSystemError(NumericalError):
    """Raised when an SPD factorization fails even after ridge regularization."""
    def __init__(self, dim: int, ridge: float):
        self.dim = dim
        self.ridge = ridge
        super().__init__(
            f"SPD factorization of a {dim}x{dim} system failed with ridge {ridge:.3e}",
            details={'dim': dim, 'ridge': ridge}
        )


class RankDeficiencyError(NumericalError):
    """Raised when the NGD system J J^T is singular."""
    def __init__(self, lambda_min: float):
        self.lambda_min = lambda_min
        super().__init__(
            f"J J^T is rank deficient (lambda_min = {lambda_min:.3e})",
            details={'lambda_min': lambda_min}
        )


class DivergenceError(NumericalError):
    """Raised when training diverges; carries the trace recorded so far."""
    def __init__(self, iteration: int, loss: float, trace=None):
        self.iteration = iteration
        self.loss = loss
        self.trace = trace
        super().__init__(
            f"Training diverged at iteration {iteration} (loss = {loss!r})",
            details={'iteration': iteration, 'loss': loss if math.isfinite(loss) else None}
        )


class DegenerateDatasetError(NumericalError):
    """Raised when no valid dataset could be drawn within the resampling limit."""
    def __init__(self, attempts: int, reason: str):
        self.attempts = attempts
        super().__init__(
            f"Could not sample a valid dataset after {attempts} attempts: {reason}",
            details={'attempts': attempts, 'reason': reason}
        )
