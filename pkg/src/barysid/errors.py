"""Exception types shared across the package."""


class BarysidError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(BarysidError):
    """Matrix or signal dimensions are inconsistent."""


class SingularAtFrequency(BarysidError):
    """(jwI - A) is numerically singular; evaluation hit an undamped pole."""

    def __init__(self, omega, rcond=None):
        self.omega = omega
        self.rcond = rcond
        msg = f"frequency response singular at omega={omega!r}"
        if rcond is not None:
            msg += f" (rcond={rcond:.3e})"
        super().__init__(msg)


class UnstableSystem(BarysidError):
    """Operation requires a Hurwitz A matrix."""


class NonzeroFeedthrough(BarysidError):
    """Operation requires a strictly proper system (D = 0)."""


class DuplicateFrequency(BarysidError):
    """Two interpolation frequencies coincide."""


class RemovableSingularity(BarysidError):
    """Rational-form evaluation requested exactly at an interpolation node.

    The limit exists and equals the interpolated value; the caller should
    use the known data instead of the barycentric quotient.
    """

    def __init__(self, omega, index):
        self.omega = omega
        self.index = index
        super().__init__(f"omega={omega!r} is interpolation node #{index}")


class SteadyStateTimeout(BarysidError):
    """No chunk passed the residual test within the allowed duration."""


class SingularCovariance(BarysidError):
    """The state block of the empirical covariance is not positive definite.

    Signals insufficient excitation; the caller may retry with ridge
    regularization enabled.
    """


class Infeasible(BarysidError):
    """No strictly feasible point exists for the matrix inequalities."""


class NumericalFailure(BarysidError):
    """An iterative solver stalled before reaching its tolerance."""


class MaxIterations(NumericalFailure):
    """Iteration limit reached."""


class NonuniformSampling(BarysidError):
    """Timestamps in an imported signal deviate from a uniform grid."""
