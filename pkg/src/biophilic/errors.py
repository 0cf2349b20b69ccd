"""Exception types shared across the package."""


class BiophilicError(Exception):
    """Base class for all package errors."""


class ShapeError(BiophilicError, ValueError):
    """Operands have incompatible dimensions."""


class DomainError(BiophilicError, ValueError):
    """Input is outside the mathematical domain of an operation."""


class ValidationError(BiophilicError, ValueError):
    """Input data violates a documented precondition or file contract."""


class FormatError(BiophilicError, ValueError):
    """A binary or text file does not match its declared layout."""


class ContractError(BiophilicError, ValueError):
    """A caller violated an API contract (e.g. train-mode batch of one)."""


class TrainingError(BiophilicError, RuntimeError):
    """Optimization failed, e.g. a non-finite gradient or diverging loss."""


class NumericsError(BiophilicError, RuntimeError):
    """A linear system could not be solved reliably."""
