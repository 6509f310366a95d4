class DataError(ValueError):
    """Malformed or inconsistent input data (files, headers, dimensions)."""


class SolverError(RuntimeError):
    """Numerical failure inside an iterative solve (non-finite iterates)."""
