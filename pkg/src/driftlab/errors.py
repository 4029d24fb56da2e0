"""Exception types shared across the package."""


class DriftlabError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(DriftlabError):
    """Invalid or unreadable experiment configuration.

    Carries an optional location string (file, line, column, or key path)
    so the CLI can point at the offending entry.
    """

    def __init__(self, message, location=None):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


class ContractError(DriftlabError, ValueError):
    """A precondition on shapes, symmetry, finiteness, or ranges failed."""


class InvalidHyperparameter(ContractError):
    """Hyperparameters outside their admissible range (e.g. beta not in [0, 1))."""


class DivergenceError(DriftlabError):
    """A trajectory left the trust region or produced non-finite values.

    Attributes
    ----------
    state : OptimizerState or None
        Last finite optimizer state before the blow-up.
    record : TrajectoryRecord or None
        Partial record accumulated up to the failure.
    """

    def __init__(self, message, state=None, record=None):
        super().__init__(message)
        self.state = state
        self.record = record


class ProjectionError(DriftlabError):
    """Manifold projection exhausted its step budget before reaching tolerance."""


class StabilityError(DriftlabError):
    """A Hessian mode violates the discrete stability bound eta*lambda < 2(1+beta).

    Attributes
    ----------
    offending : list of float
        The unstable eigenvalues.
    """

    def __init__(self, message, offending=()):
        super().__init__(message)
        self.offending = list(offending)


class DomainError(DriftlabError, ValueError):
    """An operator argument lies outside its domain (e.g. not supported on range(H))."""


class ModelMismatch(DriftlabError):
    """Supplied noise covariance is inconsistent with the model's label-noise structure."""


class IntegrationError(DriftlabError):
    """Drift integration stopped early.

    Attributes
    ----------
    partial : DriftPath or None
        Trajectory accumulated before the failure.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class FitError(DriftlabError, ValueError):
    """A fit cannot be performed: too few points, nonpositive data, or a flat signal."""


class FormatError(DriftlabError, ValueError):
    """A persisted artifact does not have the schema its consumer expects."""
