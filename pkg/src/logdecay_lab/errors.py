"""Exception hierarchy shared by all modules."""


class LabError(Exception):
    """Base class for every error raised by this package."""


class InvalidDomainError(LabError, ValueError):
    pass


class SymmetryError(LabError, ValueError):
    pass


class EllipticityError(LabError, ValueError):
    pass


class ConfigurationError(LabError, ValueError):
    """Inconsistent inputs, e.g. damping support vs. boundary classes."""


class DimensionError(LabError, ValueError):
    pass


class NearEigenvalueError(LabError, ArithmeticError):
    """The shifted operator is numerically singular at ``lambda_spec``.

    ``residual`` carries the best relative residual that was achieved (or
    ``inf`` when the factorization itself was rejected) and ``rcond`` the
    reciprocal condition estimate that triggered the error.
    """

    def __init__(self, message, lambda_spec=None, residual=float("inf"), rcond=None):
        super().__init__(message)
        self.lambda_spec = lambda_spec
        self.residual = residual
        self.rcond = rcond


class BandViolationError(LabError):
    """A computed quantity falsifies the discrete logarithmic band.

    ``offending`` lists the eigenvalues (band fit) or the imaginary parts
    tau (band probe) at which the violation was detected.
    """

    def __init__(self, message, offending=(), samples=None):
        super().__init__(message)
        self.offending = list(offending)
        self.samples = samples


class ConvergenceError(LabError, RuntimeError):
    pass


class InstabilityError(LabError, FloatingPointError):
    pass


class UndefinedFitError(LabError, ValueError):
    pass


class WeightInvalidError(LabError, ValueError):
    """A Carleman weight candidate fails one of its admissibility conditions."""

    def __init__(self, message, node=None, condition=None):
        super().__init__(message)
        self.node = node
        self.condition = condition


class ProfileError(LabError, ValueError):
    pass


class EstimateViolationError(LabError):
    def __init__(self, message, point=None, gap=None):
        super().__init__(message)
        self.point = point
        self.gap = gap


class InconsistencyError(LabError):
    pass


class ArtifactNotFoundError(LabError, FileNotFoundError):
    pass
