"""Exception and warning types shared across the package."""


class ConformalLabError(Exception):
    """Base class for all package errors."""


class DomainError(ConformalLabError, ValueError):
    """A point lies outside the domain where a quantity is defined."""


class ParameterError(ConformalLabError, ValueError):
    """Invalid construction parameters (grids, metric parameters, ...)."""


class StepTooLargeError(DomainError):
    """A finite-difference stencil leaves the domain of the field."""


class SingularPointError(DomainError):
    """Evaluation requested exactly at a kernel singularity."""


class MissingDerivativeError(ConformalLabError, ValueError):
    """A source field lacks the derivatives a formula needs."""


class QuadratureError(ConformalLabError, RuntimeError):
    """Adaptive quadrature failed to reach its tolerance."""


class GrowthHypothesisError(ConformalLabError, ValueError):
    """A field violates the sublinear growth hypothesis of the Riesz split."""

    def __init__(self, message, ratio):
        super().__init__(message)
        self.ratio = ratio


class NewtonDivergenceError(ConformalLabError, RuntimeError):
    """Newton iteration stalled or blew up. Carries the residual trace."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = list(trace)


class SingularLinearizationError(ConformalLabError, RuntimeError):
    """The linearized curvature operator lost coercivity."""


class DegenerateFitError(ConformalLabError, ValueError):
    """A regression design matrix is (numerically) rank deficient."""


class LimitDivergenceError(ConformalLabError, RuntimeError):
    """A sampled sequence grows instead of settling to a limit."""


class PoleError(ConformalLabError, ValueError):
    """Gamma function evaluated at a pole."""

    def __init__(self, message, argument=None):
        super().__init__(message)
        self.argument = argument


class ConstraintError(ConformalLabError, ValueError):
    """Parameters violate a theorem hypothesis."""


class SKCheckError(ConformalLabError, ValueError):
    """A density failed the curvature spot-check for the SK property."""

    def __init__(self, message, witness=None, curvature=None):
        super().__init__(message)
        self.witness = witness
        self.curvature = curvature


class AccuracyWarning(UserWarning):
    """Finite differences are likely dominated by rounding error."""
