"""Exception hierarchy shared by every muskit module."""


class MuskitError(Exception):
    """Base class for all toolkit errors."""


# score model
class RangeError(MuskitError, ValueError):
    pass


class OverlapError(MuskitError, ValueError):
    pass


class ScoreInvariantError(MuskitError, ValueError):
    pass


# parsers
class XmlSyntaxError(MuskitError):
    pass


class UnsupportedScoreError(MuskitError):
    pass


class MissingDivisionsError(MuskitError):
    pass


class MidiSyntaxError(MuskitError):
    pass


class UnsupportedFormatError(MuskitError):
    pass


class DanglingNoteError(MuskitError):
    def __init__(self, pitch, tick):
        super().__init__(f"note-on pitch {pitch} at tick {tick} has no matching note-off")
        self.pitch = pitch
        self.tick = tick


class TextGridSyntaxError(MuskitError):
    pass


class NoIntervalTierError(MuskitError):
    pass


class JsonSyntaxError(MuskitError):
    pass


class SchemaError(MuskitError, ValueError):
    pass


# lint
class UncorrectableError(MuskitError):
    pass


# audio
class WavSyntaxError(MuskitError):
    pass


class UnsupportedEncodingError(MuskitError):
    pass


class RateError(MuskitError, ValueError):
    pass


class PreconditionError(MuskitError):
    pass


class UnsplittableError(MuskitError):
    pass


# features / tokens / metrics
class ParamError(MuskitError, ValueError):
    pass


class FrameFileError(MuskitError):
    pass


class InsufficientDataError(MuskitError):
    pass


class DimensionError(MuskitError, ValueError):
    pass


class TokenRangeError(MuskitError, ValueError):
    pass


class EmptyInputError(MuskitError, ValueError):
    pass


class NoVoicedOverlapError(MuskitError):
    pass


# perception client
class TransportError(MuskitError):
    pass


class ProtocolError(MuskitError):
    pass


class MosTimeoutError(MuskitError, TimeoutError):
    """Raised when the MOS service does not answer within the timeout."""
