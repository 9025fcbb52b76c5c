"""Exception types shared across the toolkit.

Every error exposes a short machine-readable code (its class name) and an
optional pipeline ``stage`` tag that multi-step drivers such as
``fit.fit_chain`` attach before re-raising.
"""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details
        self.stage = None

    @property
    def code(self):
        return type(self).__name__

    def __str__(self):
        base = super().__str__()
        if self.stage:
            return f"[stage: {self.stage}] {base}"
        return base


class InvalidConfig(ToolkitError):
    """A model configuration violates one of its invariants."""


class InfeasibleOscillation(InvalidConfig):
    """stay_prob + exit_prob exceeds 1, leaving no probability for the loop advance."""


class DomainError(ToolkitError):
    """A scalar argument lies outside the mathematical domain of an operation."""


class DegenerateMixture(ToolkitError):
    """The sample moments do not describe a two-component Gaussian variance mixture."""


class NegativeDiscriminant(ToolkitError):
    """Moment noise drove the mixture discriminant negative."""


class NoImpulsesFound(ToolkitError):
    """Fewer samples exceed the amplitude threshold than the operation requires."""


class EmptyGroup(ToolkitError):
    """An amplitude interval received no impulse events."""


class TooFewEvents(ToolkitError):
    """Not enough impulse events for the requested estimate."""


class TooShort(ToolkitError):
    """No event is long enough, or the FFT size is too small, for a spectral estimate."""


class NoRoot(ToolkitError):
    """The moment equations have no solution inside the search box."""


class BinMismatch(ToolkitError):
    """Histogram operands do not share identical bin edges."""


class EmptyInput(ToolkitError):
    """An operation received an empty value sequence."""


class DegenerateInput(ToolkitError):
    """Input lacks the variation the operation requires (e.g. zero variance)."""


class UnknownModelKind(ToolkitError):
    """A parameter file names a model kind this build does not provide."""


class UsageError(ToolkitError):
    """Bad command-line arguments or flag combinations."""


class TraceFormatError(ToolkitError):
    """Base class for binary trace file format errors."""


class BadMagic(TraceFormatError):
    """The file does not start with the trace format magic bytes."""


class VersionUnsupported(TraceFormatError):
    """The trace file declares a format version this build cannot read."""


class TruncatedFile(TraceFormatError):
    """The file ends before the declared sample count."""


class ParamsFormatError(ToolkitError):
    """A parameter file is structurally malformed."""
