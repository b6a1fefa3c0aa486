"""Exception types shared across the library."""


class ShapeError(ValueError):
    """Operand shapes do not chain (matrix products, layer stacks, ...)."""


class ParameterError(ValueError):
    """An argument is outside its documented range."""


class FormatError(ValueError):
    """On-disk data violates the dataset format (row mismatch, non-finite entry, ...)."""


class NumericError(ArithmeticError):
    """A computation produced or encountered a non-finite value."""


class DegenerateClusterError(RuntimeError):
    """A cluster lost all soft-assignment mass."""


class DivergenceError(ValueError):
    """KL divergence is infinite: target puts mass where the assignment has none."""
