"""Exception types raised across the toolkit."""


class LongAlignError(Exception):
    """Base class for all toolkit errors."""


class FormatError(LongAlignError):
    """A binary or text artifact does not match its declared format."""


class NormalizationError(FormatError):
    """A posterior row is not a normalized distribution."""

    def __init__(self, row: int, logsum: float):
        self.row = row
        self.logsum = logsum
        super().__init__(f"posterior row {row} not normalized: |logsumexp| = {abs(logsum):.3e}")


class EmptyCorpusError(LongAlignError):
    """No usable tokens in the training corpus."""


class NoSpeakerMarkersError(LongAlignError):
    """A transcript contains no recognizable speaker markers."""


class DimError(LongAlignError):
    """Embedding dimensionality mismatch."""


class MissingEmbeddingError(LongAlignError):
    """A merged span has no precomputed embedding and fallback is disabled."""


class EmptyInputError(LongAlignError):
    """An operation received an empty sentence list or token sequence."""


class NoPathError(LongAlignError):
    """The decoding graph has no accepting path for the given evidence."""


class MissingTimingError(LongAlignError):
    """A hypothesis token has no frame span."""


class EmptyRefError(LongAlignError):
    """Quality statistics require a non-empty reference."""


class UniverseMismatchError(LongAlignError):
    """Predicted and gold alignments cover different sentence sets."""


class InfeasibleError(LongAlignError):
    """Split constraints cannot be satisfied."""

    def __init__(self, message: str, component=None):
        self.component = component
        super().__init__(message)


class OrderError(LongAlignError):
    """Timestamps or indices are not in the required order."""


class EpsilonCycleError(LongAlignError):
    """The epsilon sub-graph of an FSA contains a cycle."""


class ConfigError(LongAlignError):
    """Pipeline configuration is invalid."""


class StageError(LongAlignError):
    """A pipeline stage failed."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"stage '{stage}' failed: {message}")
