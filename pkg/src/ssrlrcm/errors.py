"""Exception hierarchy shared by all ssrlrcm modules."""


class SSRError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(SSRError, ValueError):
    pass


class NotPositiveDefinite(SSRError, ArithmeticError):
    """A Cholesky pivot was <= 0.

    In the regression solvers this means G + alpha*L lost positive
    definiteness, which only happens with a corrupted similarity matrix or
    a non-positive beta.
    """


class SingularMatrix(SSRError, ArithmeticError):
    pass


class SingularCore(SingularMatrix):
    """The m x m Woodbury core ``I - alpha B^T S^-1 B`` is numerically singular."""

    def __init__(self, message, alpha=None):
        super().__init__(message)
        self.alpha = alpha


class NotConverged(SSRError, ArithmeticError):
    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class AsymmetricInput(SSRError, ValueError):
    pass


class KTooLarge(SSRError, ValueError):
    pass


class TooLarge(SSRError, ValueError):
    pass


class RankCapReached(SSRError, ArithmeticError):
    def __init__(self, k_max, factor=None):
        super().__init__(f"ACA did not reach the requested accuracy within rank {k_max}")
        self.k_max = k_max
        self.factor = factor


class EmptyLabeledSet(SSRError, ValueError):
    pass


class MissingColumn(SSRError, KeyError):
    pass


class ParseError(SSRError, ValueError):
    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
        self.row = row
        self.column = column


class DegenerateDifferences(SSRError, ValueError):
    pass


class ConfigError(SSRError, ValueError):
    pass
