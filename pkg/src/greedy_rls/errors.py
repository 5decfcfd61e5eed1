"""Exception types shared across the package."""


class DataError(ValueError):
    """Input data is malformed, inconsistent, or unusable for the request."""


class NumericalError(ArithmeticError):
    """A numerically degenerate quantity was met during training or selection.

    Raised for near-singular rank-one updates, non-positive diagonal entries
    of the inverse kernel matrix, and drift detected by debug recomputation.
    """
