"""Exception hierarchy shared across the package."""


class FidsusError(Exception):
    """Base class for all package errors."""


class ShapeError(FidsusError, ValueError):
    """Operator dimensions are incompatible or not a power of two."""


class NotHermitianError(FidsusError, ValueError):
    """Input expected to be Hermitian is not."""


class NotPSDError(FidsusError, ValueError):
    """Input expected to be positive semidefinite has a negative eigenvalue."""


class NormalizationError(FidsusError, ValueError):
    """A norm bound required for embedding into a unitary is violated."""


class DomainError(FidsusError, ValueError):
    """Evaluation point lies outside the polynomial domain [-1, 1]."""


class ParameterError(FidsusError, ValueError):
    """A scalar parameter is outside its admissible range."""


class ConfigError(FidsusError, ValueError):
    """Model or experiment configuration is invalid."""


class AssumptionViolation(FidsusError):
    """The ground state is degenerate, or a model fails frustration-freeness."""


class DegenerateGroundState(AssumptionViolation):
    pass


class NotFrustrationFree(AssumptionViolation):
    pass


class ResourceCapError(FidsusError):
    """Requested accuracy needs more polynomial degree or QAE register than allowed."""


class BackendUnsupported(FidsusError):
    pass


class InsufficientData(FidsusError, ValueError):
    pass
