"""Frame, video source and resize models."""
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from psfr.errors import DimensionMismatch, PreconditionError


@dataclass(frozen=True)
class ResizeSpec:
    """Target size for deterministic resizing."""

    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise PreconditionError(f'resize target must be positive, got {self.width}x{self.height}')

    def to_dict(self):
        return {'width': self.width, 'height': self.height}


@dataclass(frozen=True, eq=False)
class FrameBuffer:
    """
    Decoded frame I_t.

    gray is an (height, width) uint8 plane; rgb, when present, an (height, width, 3)
    uint8 interleaved plane. Both are made read-only on construction.
    """

    gray: np.ndarray
    index: int = 0
    rgb: Optional[np.ndarray] = None

    def __post_init__(self):
        gray = np.ascontiguousarray(self.gray, dtype=np.uint8)
        if gray.ndim != 2 or gray.size == 0:
            raise PreconditionError('gray plane must be a non-empty 2-D array')
        gray.setflags(write=False)
        object.__setattr__(self, 'gray', gray)
        if self.rgb is not None:
            rgb = np.ascontiguousarray(self.rgb, dtype=np.uint8)
            if rgb.shape != gray.shape + (3,):
                raise DimensionMismatch(f'rgb plane {rgb.shape} does not match gray {gray.shape}')
            rgb.setflags(write=False)
            object.__setattr__(self, 'rgb', rgb)

    @property
    def width(self):
        return self.gray.shape[1]

    @property
    def height(self):
        return self.gray.shape[0]

    @property
    def shape(self):
        return self.gray.shape

    def __repr__(self):
        color = 'rgb' if self.rgb is not None else 'gray'
        return f'<FrameBuffer {self.index} {self.width}x{self.height} {color}>'


class FrameRef(NamedTuple):
    """Locator of one frame: an image file, or a plane inside a PGRY archive."""

    path: str
    offset: Optional[int] = None


@dataclass(frozen=True)
class VideoSource:
    """Ordered frame sequence I_0..I_{T-1}."""

    frame_refs: tuple
    video_id: str = ''
    resize: Optional[ResizeSpec] = None
    width: int = 0
    height: int = 0

    @property
    def count(self):
        return len(self.frame_refs)

    @property
    def is_archive(self):
        return bool(self.frame_refs) and self.frame_refs[0].offset is not None

    def to_dict(self):
        return {
            'video_id': self.video_id,
            'count': self.count,
            'width': self.width,
            'height': self.height,
            'resize': self.resize.to_dict() if self.resize else None,
        }

    def __repr__(self):
        return f'<VideoSource {self.video_id} T={self.count}>'
