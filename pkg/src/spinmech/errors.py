"""Exception hierarchy shared across the package."""


class SpinmechError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SpinmechError, ValueError):
    """An argument violates a documented precondition."""


class NumericalError(SpinmechError, RuntimeError):
    """A numerical procedure failed (integration, convergence, labeling)."""


class DegenerateLabelingError(NumericalError):
    """Two eigenstates claim the same bare spin label."""


class IntegrationError(NumericalError):
    """Time integration became unstable or produced non-finite values."""


class StepSizeError(IntegrationError):
    """Requested time step violates a stability (CFL) bound."""


class BoundaryError(IntegrationError):
    """Probability mass leaked through the computational boundary."""


class FitError(NumericalError):
    """A fit could not be set up or evaluated."""
