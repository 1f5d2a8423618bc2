"""Exception types raised across the package."""


class SlicedOTError(ValueError):
    """Base class for all input and numerical errors raised by slicedot."""


class NonFiniteInput(SlicedOTError):
    pass


class InvalidWeights(SlicedOTError):
    pass


class DimensionMismatch(SlicedOTError):
    pass


class EmptyMeasure(SlicedOTError):
    pass


class InstanceTooLarge(SlicedOTError):
    pass


class NonUniformWeights(SlicedOTError):
    pass


class NonPositiveTemperature(SlicedOTError):
    pass


class TiedInputs(SlicedOTError):
    """Raised when a derivative is requested at a point where sorting is not locally constant."""


class SizeTooSmall(SlicedOTError):
    pass


class EmptyBatch(SlicedOTError):
    pass


class NonFiniteGradient(SlicedOTError, ArithmeticError):
    """Raised by the trainer when a primal update would produce NaN or inf."""
