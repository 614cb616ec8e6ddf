"""Exception hierarchy shared by all modules."""


class CrosscurveError(Exception):
    """Base class for every error raised by the package."""


class PreconditionError(CrosscurveError):
    """An input violates a documented precondition."""


class SegmentInvalidError(CrosscurveError):
    """A segment leaves the finite-cost region of its base point."""

    def __init__(self, message: str, s: float | None = None):
        super().__init__(message)
        self.s = s


class ParametrizationError(CrosscurveError):
    """A geodesic is not parametrized at constant speed."""


class OptimalityError(CrosscurveError):
    """An input that must be optimal (a fiber point, a transport plan) is not."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class DomainError(CrosscurveError):
    """Evaluation outside the declared domain of a cost or segment."""


class CutLocusError(DomainError):
    """A sphere point is too close to the antipode of the base point."""


class DegeneracyError(CrosscurveError):
    """A mixed Hessian is singular or badly conditioned."""


class ContinuationError(CrosscurveError):
    """Newton continuation could not follow the c-segment equation."""

    def __init__(self, message: str, last_good_s: float | None = None):
        super().__init__(message)
        self.last_good_s = last_good_s


class NotSmoothError(CrosscurveError):
    """A smooth-cost operation was asked to handle a non-smooth cost."""


class InfeasibleError(CrosscurveError):
    """A transport problem has no plan of finite cost."""


class SolverError(CrosscurveError):
    """A solver failed to converge or hit its anti-cycling guard."""
