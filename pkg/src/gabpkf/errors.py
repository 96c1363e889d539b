"""Exception hierarchy shared by every module of the package."""


class GabpkfError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(GabpkfError, ValueError):
    pass


class SingularMatrix(GabpkfError, ArithmeticError):
    """A matrix that has to be inverted is (numerically) singular."""


class SingularBlock(SingularMatrix):
    pass


class SingularInnovation(SingularMatrix):
    pass


class SingularCovariance(SingularMatrix):
    pass


class SingularNormalMatrix(SingularMatrix):
    pass


class ZeroDiagonal(GabpkfError, ValueError):
    pass


class NonPositiveDiagonal(GabpkfError, ValueError):
    pass


class GabpRuntimeError(GabpkfError, ArithmeticError):
    """Raised from inside a message-passing round."""


class Divergence(GabpRuntimeError):
    pass


class ZeroIntermediatePrecision(GabpRuntimeError):
    pass


class ZeroMarginalPrecision(GabpRuntimeError):
    pass


class NotConverged(GabpkfError):
    """An iterative solve hit its round limit or diverged.

    ``partial`` holds whatever was computed (e.g. the inverse with the
    failing columns filled by their last iterate), ``failing`` the failing
    column / node indices and ``step`` names the stage that failed when the
    solve was part of a larger computation.
    """

    def __init__(self, message, partial=None, failing=(), step=None):
        super().__init__(message)
        self.partial = partial
        self.failing = list(failing)
        self.step = step


class BetaOutOfRange(GabpkfError, ValueError):
    pass


class DegenerateStep(GabpkfError, ArithmeticError):
    pass


class InfeasibleStart(GabpkfError, ValueError):
    pass


class MatrixFormatError(GabpkfError, ValueError):
    """Parse error in a matrix file; carries the path and 1-based line."""

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")
