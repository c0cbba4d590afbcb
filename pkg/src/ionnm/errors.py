"""Exception types raised across the package."""


class IonNMError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(IonNMError, ValueError):
    """A parameter lies outside its allowed domain."""


class InvalidInputError(IonNMError, ValueError):
    """Input data (e.g. a sampled curve) is malformed."""


class SoftModeInstabilityError(IonNMError, ValueError):
    """The linear chain is not a stable equilibrium at this trap frequency."""


class WrongPhaseError(IonNMError, ValueError):
    """An operation was requested for the wrong structural phase."""


class UnstableEquilibriumError(IonNMError, RuntimeError):
    """The Hessian at the computed equilibrium has negative eigenvalues."""


class SoftModeDivergenceError(IonNMError, ZeroDivisionError):
    """A coupled mode has zero frequency, so its displacement diverges."""


class ResourceLimitError(IonNMError, MemoryError):
    """A brute-force computation would exceed its tractable size."""
