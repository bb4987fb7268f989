"""Exception hierarchy shared across the package."""


class GtibError(Exception):
    """Base class for all package errors."""


class SpectralDataError(GtibError):
    """Invalid or inconsistent spectral data."""


class KernelRangeError(GtibError):
    """A requested kernel argument falls outside (or between) table points."""


class CutRequiredError(GtibError):
    """A divergence-flagged kernel entry would enter a linear system."""


class InstabilityError(GtibError):
    """The bordering recursion lost numerical validity.

    Attributes:
        step_index: recursion size at which the failure was detected.
    """

    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index


class PlanningError(GtibError):
    """A recovery plan cannot be constructed for the given data/grid."""


class RecoveryError(GtibError):
    """A planned recovery failed part-way through.

    Attributes:
        segment_index: index of the failing plan segment.
        step_index: march step inside that segment, when known.
        partial: RecoveredSignal holding whatever was computed (NaN elsewhere).
    """

    def __init__(self, message, segment_index=None, step_index=None, partial=None):
        super().__init__(message)
        self.segment_index = segment_index
        self.step_index = step_index
        self.partial = partial


class ConfigError(GtibError):
    """Invalid experiment configuration."""
