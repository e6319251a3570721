"""Exceptions raised by the exporter."""


class ExporterError(Exception):
    """Base class for all exporter failures."""


class BadTemplate(ExporterError):
    """A prompt template does not contain exactly one {} slot."""


class EmptyClassList(ExporterError):
    """No class names were given to embed."""


class EncoderFailure(ExporterError):
    """The text encoder raised, or returned something unusable."""


class ShapeMismatch(ExporterError):
    """A prediction tensor does not match the ground-truth geometry."""


class UnknownOutput(ExporterError):
    """A prediction key is not one of the exportable tensor names."""


class MissingGroundTruth(ExporterError):
    """A frame directory lacks the ground-truth files needed for validation."""


class ManifestError(ExporterError):
    """The bundle manifest is missing or does not list the requested frame."""


class MalformedTensor(ExporterError):
    """A tensor file violates the container layout."""
