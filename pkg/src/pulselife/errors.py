"""Exception types shared across the package."""


class PulselifeError(Exception):
    """Base class for all package-specific errors."""


# --- labeling -------------------------------------------------------------

class EmptyDataset(PulselifeError):
    """No qualifying cycles were found."""


class NonDecaying(PulselifeError):
    """Capacity curve never falls; the end-of-life threshold is unreachable."""


class InsufficientData(PulselifeError):
    """Too few cycles for the requested computation."""


# --- ingestion ------------------------------------------------------------

class SchemaError(PulselifeError):
    """A file does not conform to the expected column/key schema."""


class OrderingError(PulselifeError):
    """Records are not ordered by (cycle, step, time)."""


class UnitError(PulselifeError):
    """A physically impossible value, e.g. capacity decreasing mid-discharge."""


class PulseCountError(PulselifeError):
    """A diagnostic cycle did not segment into exactly 10 pulses."""


class AmbiguousSegmentation(PulselifeError):
    """Current-signature pulse detection found candidates it cannot separate."""


# --- simulation -----------------------------------------------------------

class SpecError(PulselifeError):
    """Inconsistent simulation parameters."""


# --- feature extraction ---------------------------------------------------

class SpanError(PulselifeError):
    """Too many grid points fall outside the curve's voltage span."""


class LengthMismatch(PulselifeError):
    """Paired arrays have different lengths."""


class MissingCycle(PulselifeError):
    """A cycle required for feature extraction is absent."""


class EmptyOverlap(PulselifeError):
    """Two partial curves share no voltage range."""


# --- modeling -------------------------------------------------------------

class TooFewRows(PulselifeError):
    """Not enough rows to fit."""


class NonConvergence(PulselifeError):
    """The solver failed to reach its convergence criterion."""


class RankError(PulselifeError):
    """Eigendecomposition of the covariance matrix failed."""


class TargetTooLarge(PulselifeError):
    """Requested more selected features than are available."""


class FeatureMismatch(PulselifeError):
    """Input feature names do not match the fitted model."""


# --- evaluation -----------------------------------------------------------

class MissingGrouping(PulselifeError):
    """A CV scheme cannot form valid folds from the given cell metadata."""


# --- explanation ----------------------------------------------------------

class DegenerateWeights(PulselifeError):
    """The coalition regression system is singular."""


class NonPositiveResistanceWarning(UserWarning):
    """An extracted pulse resistance was <= 0; the value is kept as-is."""
