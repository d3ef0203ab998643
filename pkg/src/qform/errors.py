"""Exception types raised across the package."""


class QFormError(Exception):
    """Base class for all numerical failures in this package."""


class DimensionMismatch(QFormError, ValueError):
    pass


class NotPositiveDefinite(QFormError):
    pass


class NotPositiveSemiDefinite(QFormError):
    """A weight matrix has eigenvalues below the clipping tolerance."""


class ConvergenceFailure(QFormError):
    pass


class AllZeroSpectrum(QFormError):
    pass


class DegenerateVariance(QFormError):
    pass


class DegenerateSkewness(QFormError):
    pass


class DegenerateKurtosis(QFormError):
    pass


class DegenerateFamilyVariance(QFormError):
    pass


class NoSolution(QFormError):
    """The matching equations have no root in the admissible region."""


class RootNotBracketed(QFormError):
    pass


class SeriesOverflow(QFormError):
    pass


class TruncationFailure(QFormError):
    pass


class QuadratureFailure(QFormError):
    pass


class MatrixParseError(QFormError, ValueError):
    """A CSV matrix or vector file could not be parsed.

    ``line`` is the 1-based line number of the offending row, if known.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
