"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operand shapes do not conform (wrong extents, K mismatch, ...)."""


class ConvergenceConditionError(ValueError):
    """The Cauchy step-size bound lambda <= 8*gamma**2 is violated."""


class NumericDivergenceError(RuntimeError):
    """A cost evaluation produced a non-finite value during iteration.

    Carries the cost trace accumulated up to the failure.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class FilterDegenerateError(RuntimeError):
    """A filter collapsed to the zero vector before renormalization."""

    def __init__(self, k):
        super().__init__(f"filter {k} collapsed to zero norm before renormalization")
        self.k = k


class ImageFormatError(ValueError):
    """An image file could not be parsed; message names the byte offset."""


class CheckpointVersionError(ValueError):
    """A checkpoint was written with an incompatible format version."""
