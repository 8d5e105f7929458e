"""Exception hierarchy shared by every pipeline stage."""


class VerbTrackError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(VerbTrackError):
    pass


class SchemaError(VerbTrackError):
    pass


class FrameIndexError(VerbTrackError, IndexError):
    """A frame index falls outside the video."""


class OutOfRange(VerbTrackError):
    pass


class MissingThreshold(VerbTrackError):
    pass


class NoObjectPresent(VerbTrackError):
    pass


class EmptyFrame(VerbTrackError):
    def __init__(self, frame):
        super().__init__(f"frame {frame} has no candidate boxes")
        self.frame = frame


class EmptyRegion(VerbTrackError):
    pass


class TooShort(VerbTrackError):
    pass


class NoTracks(VerbTrackError):
    pass


class NoOverlap(VerbTrackError):
    pass


class DegenerateInput(VerbTrackError):
    pass


class SchemaMismatch(VerbTrackError):
    pass


class EmptySeries(VerbTrackError):
    pass


class EmptyBank(VerbTrackError):
    pass


class NoExemplars(VerbTrackError):
    pass


class SizeExceeded(VerbTrackError):
    pass
