"""Exception taxonomy shared across the package."""


class SatPbcError(Exception):
    """Base class for all package errors."""


class EvaluationError(SatPbcError):
    """A user-supplied evaluator returned a non-finite value.

    Carries the offending point so finite-difference stencils can be debugged.
    """

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class ShapeError(SatPbcError):
    """Dimension or symmetry requirement violated."""


class NumericFailure(SatPbcError):
    """An iterative numerical routine did not meet its accuracy contract."""


class DivergenceError(SatPbcError):
    """Integration produced a non-finite state.

    ``time`` is the integration time at which the blow-up was detected.
    """

    def __init__(self, message, time):
        super().__init__(message)
        self.time = time


class RankError(SatPbcError):
    """A matrix that must have full (column) rank does not."""


class NotAssignableError(SatPbcError):
    """The requested target is not an assignable equilibrium."""


class MetadataError(SatPbcError):
    """A model is missing optional metadata required by the operation."""


class ConfigurationError(SatPbcError):
    """Controller or scenario parameters violate their constraints."""


class WiringError(SatPbcError):
    """A controller requests measurements the plant does not provide."""


class AssumptionViolation(SatPbcError):
    """A structural hypothesis required by a reduction does not hold."""


class DegenerateNetworkError(SatPbcError):
    """The mixed-potential Hessian is singular at the evaluation point."""


class InvariantViolation(SatPbcError):
    """A quantity left the region it is mathematically confined to."""


class PreconditionError(SatPbcError):
    """An operation was called outside its stated precondition."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
