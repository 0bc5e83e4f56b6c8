"""Exception types shared across the package."""


class MultiqfError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(MultiqfError, ValueError):
    """Multiport dimension is smaller than 2 or otherwise unusable."""


class LayoutError(MultiqfError, ValueError):
    """Circuit layout contains a malformed element (bad ports, bad kind)."""


class DecompositionError(MultiqfError, ValueError):
    """Mesh decomposition cannot proceed (non-unitary input or residuals)."""


class ParameterError(MultiqfError, ValueError):
    """A numeric parameter is outside its admissible range."""


class FeasibilityError(MultiqfError, ValueError):
    """The gain inequality required by a referee strategy is violated."""


class ValidityError(MultiqfError, ValueError):
    """The small-photon-number regime assumption is violated."""


class ConvergenceError(MultiqfError, RuntimeError):
    """An iterative search ran out of budget before converging."""
