"""Exception hierarchy shared across the package."""


class KrigebandError(Exception):
    """Base class for all errors raised by this package."""


class GridMismatchError(KrigebandError):
    """Two curves do not share the same time grid."""


class IngestError(KrigebandError):
    """Malformed input data; carries the offending row number when known."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class UnderdeterminedFitError(KrigebandError):
    """Fewer samples than basis functions; the smoothing fit has no unique solution."""


class EmptyVariogramError(KrigebandError):
    """No site pair falls within the requested maximum lag."""


class DegenerateFitError(KrigebandError):
    """Empirical variogram carries no signal (e.g. all curves identical)."""


class SingularSystemError(KrigebandError):
    """Kriging system cannot be assembled (coincident training sites)."""


class SolverFailureError(KrigebandError):
    """Linear solver did not reach the requested residual, even after fallback."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SplitDegenerateError(KrigebandError):
    """Proximity split left the training or calibration side empty."""


class SurrogateFailureError(KrigebandError):
    """Too many surrogate predictions failed for the calibration to be trusted."""


class BaselineFailureError(KrigebandError):
    """Too many bootstrap resamples failed."""


class GenerationError(KrigebandError):
    """Simulated dataset could not be generated (covariance not positive definite)."""


class ConformalStageError(KrigebandError):
    """Wraps a failure inside the band-construction pipeline with its stage label.

    ``stage`` is one of ``split``, ``variogram``, ``kriging``, ``scoring``.
    """

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
