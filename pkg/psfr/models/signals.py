"""Per-frame cue and cached signal models."""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from psfr.errors import DimensionMismatch
from psfr.models.vision import HIST_DIM

SIGNAL_DIM = 5
RAW_DIM = 6
RAW_FIELDS = ('c', 'z', 'e', 'H', 'm', 'L')
# Columns of the raw block that feed s_t; m (index 4) stays raw-only
SIGNAL_COLUMNS = (0, 1, 2, 3, 5)
MOTION_COLUMN = 4


class RawCues(NamedTuple):
    """
    Raw per-frame cues.

    c: tracked-corner count, z: central-window corner count, e: Canny edge density,
    H: normalized grayscale entropy, m: mean accepted displacement in pixels,
    L: low-retention patch count.
    """

    c: float
    z: float
    e: float
    H: float
    m: float
    L: float


@dataclass(frozen=True, eq=False)
class SignalTrack:
    """Cached per-video signals: S (T x 5), H (T x 432) and raw cues (T x 6), float32."""

    S: np.ndarray
    H: np.ndarray
    raw: np.ndarray
    video_id: str = ''

    def __post_init__(self):
        for name in ('S', 'H', 'raw'):
            object.__setattr__(self, name, np.ascontiguousarray(getattr(self, name), dtype=np.float32))
        t = len(self.S)
        if self.S.shape != (t, SIGNAL_DIM) or self.H.shape != (t, HIST_DIM) or self.raw.shape != (t, RAW_DIM):
            raise DimensionMismatch(
                f'inconsistent signal shapes S={self.S.shape} H={self.H.shape} raw={self.raw.shape}'
            )

    @property
    def count(self):
        return len(self.S)

    def equals(self, other):
        """Bit-exact comparison of all arrays."""
        return all(
            np.array_equal(getattr(self, name), getattr(other, name))
            for name in ('S', 'H', 'raw')
        )

    def to_dict(self):
        return {'video_id': self.video_id, 'T': self.count}

    def __repr__(self):
        return f'<SignalTrack {self.video_id} T={self.count}>'
