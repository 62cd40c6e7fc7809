"""Error and warning types shared across the package."""


class KrdoaError(Exception):
    """Base class for errors raised by this package."""


class DomainError(KrdoaError, ValueError):
    """An input violates a documented precondition (bad angle, bad shape, ...)."""


class CapabilityError(KrdoaError):
    """The request is outside what the selected method can do.

    Raised, for example, when more sources are requested than the decoupled
    subspaces can resolve, or when a rooting-based backend is pointed at a
    non-uniform axis. The message names the limit and, where one exists, the
    supported alternative.
    """


class EstimationError(KrdoaError, RuntimeError):
    """Estimation started but could not produce the requested estimates."""


class SubspaceSeparationWarning(UserWarning):
    """Signal and noise eigenvalues are too close to split reliably."""
