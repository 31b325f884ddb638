"""Exception hierarchy shared by the solver modules."""


class SolverError(Exception):
    """Base class for all errors raised by this package."""


class InputError(SolverError, ValueError):
    """Malformed input: dimension mismatch, invalid configuration, ..."""


class MatrixMarketError(InputError):
    """Raised when a Matrix Market stream cannot be parsed.

    ``lineno`` is the 1-based line of the offending input (``None`` when the
    problem is not tied to a single line, e.g. a truncated entry list).
    """

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class SingularTriangularError(SolverError):
    """A triangular factor has a (numerically) zero diagonal entry.

    ``index`` is 1-based to match the usual mathematical numbering.
    """

    def __init__(self, index, value=0.0):
        self.index = index
        self.value = value
        super().__init__(f"singular triangular matrix: |U[{index},{index}]| = {abs(value):.3e}")


class SingularMatrixError(SolverError):
    """Zero pivot encountered after partial pivoting."""

    def __init__(self, index):
        self.index = index
        super().__init__(f"singular matrix: zero pivot in column {index}")


class RankDeficientError(SolverError):
    """QR factorisation found a (numerically) dependent column."""

    def __init__(self, index):
        self.index = index
        super().__init__(f"rank deficient input: column {index} is dependent")


class ConvergenceError(SolverError):
    """The dense eigensolver did not converge within its sweep budget."""


class FactorizationError(SolverError):
    """Incomplete factorisation hit a zero or tiny pivot."""

    def __init__(self, row, message=None):
        self.row = row
        super().__init__(message or f"ILU(0) breakdown: tiny pivot in row {row}")
