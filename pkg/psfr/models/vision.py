"""Corner, pyramid and tracking result models."""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

HIST_BINS = (12, 6, 6)  # hue x saturation x value
HIST_DIM = 432


class Corner(NamedTuple):
    """Shi-Tomasi corner at subpixel position (x, y) with its min-eigenvalue response."""

    x: float
    y: float
    response: float = 0.0


def corners_to_array(corners):
    """Positions of a corner list as an (N, 2) float32 array."""
    if not corners:
        return np.zeros((0, 2), dtype=np.float32)
    return np.asarray([(c.x, c.y) for c in corners], dtype=np.float32)


@dataclass(frozen=True, eq=False)
class ImagePyramid:
    """
    Gaussian pyramid over a full-resolution base; depth counts level 0.

    Only the base is stored; the tracker derives the coarser levels itself.
    """

    base: np.ndarray
    depth: int = 1

    @property
    def shape(self):
        return self.base.shape

    def __len__(self):
        return self.depth

    def __repr__(self):
        return f'<ImagePyramid {self.depth} levels {self.shape[1]}x{self.shape[0]}>'


@dataclass(frozen=True, eq=False)
class TrackResult:
    """
    Outcome of tracking N points from one frame to the next.

    points_out is (N, 2) float32, status (N,) bool, fb_error (N,) float32 in pixels.
    """

    points_out: np.ndarray
    status: np.ndarray
    fb_error: np.ndarray

    def __post_init__(self):
        n = len(self.points_out)
        if len(self.status) != n or len(self.fb_error) != n:
            raise ValueError('track result arrays must have equal length')

    @property
    def accepted(self):
        """Positions of accepted tracks (T^{t+1})."""
        return self.points_out[self.status]

    def __len__(self):
        return len(self.points_out)
