"""Exception hierarchy shared by all modules."""


class QExploitError(Exception):
    """Base class for package errors."""


class InvalidInputError(QExploitError, ValueError):
    """An input array or index is malformed (non-finite, out of range, wrong shape)."""


class ParameterError(QExploitError, ValueError):
    """A scalar hyperparameter is outside its admissible range."""


class ConfigError(QExploitError):
    """An experiment configuration is inconsistent or unsupported."""


class NotConvergedError(QExploitError):
    """A solver result did not meet its stopping criterion."""


class ProvenanceError(QExploitError):
    """Artifacts built from different games/grids/parameters were combined."""


class BudgetExceededError(QExploitError):
    """A brute-force enumeration would exceed its node budget."""

    def __init__(self, message: str, estimate: int):
        super().__init__(message)
        self.estimate = estimate
