"""Exception hierarchy shared by all modules."""


class GraphNLSError(Exception):
    """Base class for every error raised by :mod:`nlsgraph`."""


# graph / grid
class InvalidTopology(GraphNLSError, ValueError):
    pass


class NonpositiveWeight(GraphNLSError, ValueError):
    pass


class ConstraintViolated(GraphNLSError, ValueError):
    pass


class GridMismatch(GraphNLSError, ValueError):
    pass


class TruncationTooShort(GraphNLSError, ValueError):
    pass


# stationary states
class InadmissiblePattern(GraphNLSError, ValueError):
    pass


class NonpositiveOmega(GraphNLSError, ValueError):
    pass


class OddN(GraphNLSError, ValueError):
    pass


# shooting
class LambdaTooCloseToContinuum(GraphNLSError, ValueError):
    pass


class IntegratorFailure(GraphNLSError, RuntimeError):
    pass


class WindowInvalid(GraphNLSError, ValueError):
    pass


class RootRefinementFailure(GraphNLSError, RuntimeError):
    pass


class NoZeroFound(GraphNLSError, RuntimeError):
    pass


# discrete operators
class FactorizationSingular(GraphNLSError, RuntimeError):
    pass


class NoConvergence(GraphNLSError, RuntimeError):
    pass


class NonPositiveLminusBeyondKernel(GraphNLSError, RuntimeError):
    pass


# dynamics
class NonlinearSolveDiverged(GraphNLSError, RuntimeError):
    pass


class ContinuityViolatedAtInput(GraphNLSError, ValueError):
    pass


class NoGrowthDetected(GraphNLSError, RuntimeError):
    """Raised when a perturbation never leaves the noise floor.

    For spectrally stable states this is the expected outcome.
    """


class SupercriticalP(GraphNLSError, ValueError):
    pass
