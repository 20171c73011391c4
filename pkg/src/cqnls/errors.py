"""Exception hierarchy shared across the solver modules."""


class CQNLSError(Exception):
    """Base class for all solver errors."""


class InvalidDimension(CQNLSError, ValueError):
    pass


class DegenerateGrid(CQNLSError, ValueError):
    pass


class ShapeMismatch(CQNLSError, ValueError):
    pass


class OutOfDomain(CQNLSError, ValueError):
    pass


class UnsupportedExponent(CQNLSError, ValueError):
    pass


class OmegaOutOfRange(CQNLSError, ValueError):
    pass


class AlphaOutOfRange(CQNLSError, ValueError):
    pass


class NoConvergence(CQNLSError, RuntimeError):
    """Newton iteration hit ``max_iter`` without meeting the tolerance."""

    def __init__(self, message, *, omega=None, alpha=None, residual=None):
        super().__init__(message)
        self.omega = omega
        self.alpha = alpha
        self.residual = residual


class TrivialCollapse(NoConvergence):
    """The iterate collapsed onto the trivial solution Q = 0."""


class SingularJacobian(NoConvergence):
    pass


class AdaptiveFail(NoConvergence):
    """Step halving in a continuation reached its minimum step."""


class BranchGap(CQNLSError, RuntimeError):
    """Some frequencies of a branch sweep could not be reached.

    The partially assembled branch is available as ``branch`` and the
    unreachable frequencies as ``missing``.
    """

    def __init__(self, message, branch=None, missing=()):
        super().__init__(message)
        self.branch = branch
        self.missing = list(missing)


class NoInteriorExtremum(CQNLSError, ValueError):
    pass


class FactorizationFailure(CQNLSError, RuntimeError):
    pass


class AccuracyLost(CQNLSError, RuntimeError):
    """Relative energy drift exceeded the configured ceiling."""

    def __init__(self, message, time=None, delta_e=None):
        super().__init__(message)
        self.time = time
        self.delta_e = delta_e


class NonFiniteField(CQNLSError, FloatingPointError):
    pass


class EmptyBranch(CQNLSError, ValueError):
    pass
