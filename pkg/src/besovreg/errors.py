"""Exception hierarchy shared across the package."""


class BesovRegError(Exception):
    """Base class for all package errors."""


class ConfigurationError(BesovRegError, ValueError):
    """Inconsistent shapes, sizes or study settings."""


class ParameterError(BesovRegError, ValueError):
    """A numerical parameter lies outside its admissible range."""


class NumericalDomainError(BesovRegError, ArithmeticError):
    """Non-finite values produced during evaluation."""


class StepRuleError(BesovRegError, RuntimeError):
    """Fixed-step iteration diverged; switch to backtracking."""


class SingularInstanceError(BesovRegError, ArithmeticError):
    """Rank-deficient operator where injectivity is required."""
