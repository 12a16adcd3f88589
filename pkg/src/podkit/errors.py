"""Exception types raised across podkit."""


class PodkitError(Exception):
    """Base class for every error raised by this package."""


class IntegrityError(PodkitError):
    """A corpus file or mapping fails the conservative integrity rules."""


# midi ingest
class MalformedFile(IntegrityError, ValueError):
    pass


class UnsupportedFormat(IntegrityError, ValueError):
    pass


class DanglingNoteOn(IntegrityError, ValueError):
    def __init__(self, track, tick, pitch):
        self.track = track
        self.tick = tick
        self.pitch = pitch
        super().__init__(
            f"note-on for pitch {pitch} at tick {tick} in track {track!r} has no matching note-off"
        )


class AmbiguousTrackName(IntegrityError):
    def __init__(self, track_name, candidates=()):
        self.track_name = track_name
        self.candidates = tuple(candidates)
        detail = f" (candidates: {', '.join(self.candidates)})" if self.candidates else ""
        super().__init__(f"ambiguous track name {track_name!r}{detail}")


class UnknownTrackName(IntegrityError):
    def __init__(self, track_name):
        self.track_name = track_name
        super().__init__(f"no instrument mapping for track name {track_name!r}")


class InvalidInstrumentMap(IntegrityError):
    pass


# piano rolls
class NonIntegerQuantum(PodkitError, ValueError):
    pass


class LengthMismatch(PodkitError, ValueError):
    pass


# evaluation
class DimensionMismatch(PodkitError, ValueError):
    pass


class EmptyTestSet(PodkitError, ValueError):
    pass


class OrderTooLarge(PodkitError, ValueError):
    pass


# corpus
class MissingFile(IntegrityError):
    def __init__(self, folder_id, path):
        self.folder_id = folder_id
        self.path = path
        super().__init__(f"folder {folder_id}: missing {path}")


class MalformedMetadata(IntegrityError):
    def __init__(self, folder_id, reason):
        self.folder_id = folder_id
        super().__init__(f"folder {folder_id}: {reason}")


class WriteFailure(PodkitError, OSError):
    pass
