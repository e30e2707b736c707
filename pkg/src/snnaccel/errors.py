"""Exception taxonomy shared across the toolkit.

Artifact file problems split three ways so callers can distinguish a file
that was never an artifact (FormatError), one that was damaged in transit
(CorruptionError), and one that simply ends early (TruncationError).
"""


class SnnAccelError(Exception):
    """Base class for all toolkit errors."""


class ArtifactError(SnnAccelError):
    """Base class for deployment-artifact errors."""


class FormatError(ArtifactError):
    """Bad magic, unsupported version, or malformed container structure."""


class CorruptionError(ArtifactError):
    """Stored digest does not match the bytes actually present."""


class TruncationError(ArtifactError):
    """Byte stream ended before the declared content was complete."""


class ValidationError(ArtifactError):
    """An artifact violates its invariants at the requested level."""


class ConstructionError(SnnAccelError):
    """Network specification is dimensionally or structurally inconsistent."""


class EncodingError(SnnAccelError):
    """Input intensities outside the encodable range."""


class QuantizationError(SnnAccelError):
    """Weights or thresholds cannot be mapped to the integer domain."""


class ContractError(SnnAccelError):
    """A runtime precondition was violated by the caller."""


class PackingError(SnnAccelError):
    """Event field exceeds its packed wire-format range."""


class RoutingError(SnnAccelError):
    """Malformed or out-of-range packet in the accelerator input stream."""


class TrainingError(SnnAccelError):
    """Training data is degenerate (empty, single-class, or inconsistent)."""
