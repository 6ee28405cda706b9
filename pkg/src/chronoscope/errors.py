"""Exception hierarchy.

Every error raised on purpose by this package derives from ChronoscopeError,
so callers can catch one type at the CLI boundary.
"""


class ChronoscopeError(Exception):
    """Base class for all errors raised by chronoscope."""


# --- data ingestion ---------------------------------------------------------

class DuplicateTimestamp(ChronoscopeError):
    """Two rows share the same (series_id, timestamp)."""


class UnparseableRow(ChronoscopeError):
    """A row could not be parsed; carries the 1-based line number."""

    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


class EmptySeries(ChronoscopeError):
    """No usable observations for a series."""


class MissingLeadingValue(ChronoscopeError):
    """First observation of a series is missing; forward-fill would look ahead."""


class TooShort(ChronoscopeError):
    """Series shorter than the operation requires."""


class BadParams(ChronoscopeError):
    """Invalid parameters for a synthetic-series generator."""


# --- statistics -------------------------------------------------------------

class ZeroVariance(ChronoscopeError):
    """Series has no variance; autocorrelation is undefined."""


class ShapeMismatch(ChronoscopeError):
    """Matrix/vector dimensions do not line up."""


class DegenerateSample(ChronoscopeError):
    """Both samples constant; the t statistic carries no information."""


# --- features & forecasting -------------------------------------------------

class SpecInfeasible(ChronoscopeError):
    """Series too short for the requested feature specification."""


class DegenerateTarget(ChronoscopeError):
    """Target column is constant; boosting reduces to the base score."""


class NoConvergedCandidate(ChronoscopeError):
    """No ARIMA candidate converged; caller fell back to a random walk."""


class NotFittedError(ChronoscopeError):
    """predict() called before fit()."""


# --- metrics ----------------------------------------------------------------

class LengthMismatch(ChronoscopeError):
    """y_true and y_pred have different lengths."""


class TrainTooShort(ChronoscopeError):
    """Training series not longer than the seasonal period."""


# --- explainers -------------------------------------------------------------

class TooManySegments(ChronoscopeError):
    """More segments requested than there are context points."""


class DegenerateModel(ChronoscopeError):
    """Model output is constant over all perturbations."""


class FeatureMismatch(ChronoscopeError):
    """Row width does not match the ensemble's feature count."""


class BlackboxUnavailable(ChronoscopeError):
    """The black-box forecaster endpoint could not be reached."""


# --- causal rating ----------------------------------------------------------

class UnresolvableProtectedKey(ChronoscopeError):
    """Protected attribute cannot be derived from the record's timestamps."""


class GroupTooSmall(ChronoscopeError):
    """Fewer than two usable protected groups remain."""


class MissingReference(ChronoscopeError):
    """Reference treatment level absent from the frame."""


class AllCellsEmpty(ChronoscopeError):
    """No (treatment, protected) cell has any outcomes."""


class SingleSeriesDataset(ChronoscopeError):
    """Rating requested on a dataset with a single series, where a
    between-series or between-group comparison is not meaningful."""


# --- adapter / protocol -----------------------------------------------------

class TransportError(ChronoscopeError):
    """Endpoint process or connection failed."""


class AdapterTimeout(ChronoscopeError):
    """Endpoint did not answer within the deadline."""


class ProtocolViolation(ChronoscopeError):
    """Response violates the wire protocol (wrong length, NaN, bad JSON)."""


class ModelLoadError(ChronoscopeError):
    """A bridge model reference could not be resolved."""


# --- config / CLI -----------------------------------------------------------

class ConfigInvalid(ChronoscopeError):
    """Run configuration document failed validation; carries the offending key."""

    def __init__(self, key: str, reason: str):
        self.key = key
        self.reason = reason
        super().__init__(f"config key '{key}': {reason}")
