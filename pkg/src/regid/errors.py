"""Exception types shared across the estimator modules."""


class RegidError(Exception):
    """Base class for all errors raised by this package."""


class InvalidHyper(RegidError):
    """Hyperparameter outside its admissible range."""


class OrderZero(RegidError):
    """Requested matrix or FIR order below 1."""


class LengthMismatch(RegidError):
    """Sequence lengths inconsistent with each other or with a declared order."""


class EmptyData(RegidError):
    """An operation received zero-length data."""


class DegenerateProblem(RegidError):
    """Regression problem too degenerate for the requested computation."""


class SingularSigma(RegidError):
    """Output covariance is singular (zero noise and rank-deficient span)."""


class SingularSystem(RegidError):
    """Linear system could not be factorized."""


class ZeroOutputVariance(RegidError):
    """Noiseless output has zero variance; SNR scaling impossible."""


class ZeroTruth(RegidError):
    """Reference impulse response has zero norm; fit undefined."""


class HorizonTooLong(RegidError):
    """Prediction horizon reaches past the end of the test record."""


class DegenerateVariance(RegidError):
    """Sample variance of the requested coordinate is zero."""


class ParseError(RegidError):
    """Malformed input file; carries the offending line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NonConsecutiveTime(RegidError):
    """Time column is not 1, 2, 3, ..."""


class IoError(RegidError):
    """Filesystem write failed."""


class UsageError(RegidError):
    """Bad command-line invocation."""
