"""Exception hierarchy shared by services and the CLI."""


class PsfrError(Exception):
    """Base class for every error raised by the toolkit."""

    def to_dict(self):
        """Convert error to dictionary for JSON error reports."""
        return {'error': type(self).__name__, 'message': str(self)}


class InvalidConfig(PsfrError, ValueError):
    """A configuration value is outside its allowed range."""


class PreconditionError(PsfrError, ValueError):
    """An operation was called with arguments violating its precondition."""


# Media

class MediaError(PsfrError):
    """Base class for frame ingestion failures."""


class NoFrames(MediaError):
    """The frame directory holds no decodable frames."""


class DimensionMismatch(MediaError):
    """Frames or planes disagree on their dimensions."""


class CorruptFrame(MediaError):
    """A frame could not be decoded."""

    def __init__(self, t, reason=''):
        self.t = t
        super().__init__(f'frame {t} could not be decoded' + (f': {reason}' if reason else ''))


class IndexOutOfRange(MediaError, IndexError):
    """Frame index outside 0..count-1."""


# Signals

class CorruptCache(PsfrError):
    """A signal cache file has a bad header or is truncated."""


class MissingSignals(PsfrError):
    """No signal cache exists for a referenced video."""

    def __init__(self, video_id):
        self.video_id = video_id
        super().__init__(f'no signal cache for video {video_id!r}')


# Selection and evaluation

class EmptyCandidates(PsfrError, ValueError):
    """The candidate set A_q is empty."""


class MissingWeight(PsfrError, KeyError):
    """A ground-truth frame has no relevance weight."""

    def __str__(self):
        return Exception.__str__(self)


class AlignmentError(PsfrError):
    """Selections and instances do not line up one-to-one."""


class InvalidGenome(PsfrError, ValueError):
    """A genome vector is outside its bounds or not quantized."""


class CorruptAnnotations(PsfrError):
    """An annotation or selection file could not be parsed."""


class InvalidSynthSpec(PsfrError, ValueError):
    """A synthetic-corpus description is malformed."""
