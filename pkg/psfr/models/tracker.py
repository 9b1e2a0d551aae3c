"""Patch grid, tracker configuration, state and per-frame outcome models."""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from psfr.errors import InvalidConfig


@dataclass(frozen=True, eq=False)
class PatchGrid:
    """
    Regular grid of patches g_j, optionally with centroidal patches.

    rects is an (N_g, 4) int array of half-open pixel rectangles (x0, y0, x1, y1); the
    first base_rows * base_cols rows are the base patches in row-major order.
    """

    width: int
    height: int
    base_rows: int
    base_cols: int
    centroidal: bool
    rects: np.ndarray

    @property
    def count(self):
        return len(self.rects)

    @property
    def base_count(self):
        return self.base_rows * self.base_cols

    def membership(self, points):
        """
        Patch membership of points.

        Args:
            points: (N, 2) array of (x, y) positions

        Returns:
            (N, N_g) bool array, True where the point lies inside the patch
        """
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        x = pts[:, :1]
        y = pts[:, 1:]
        r = self.rects
        return (x >= r[:, 0]) & (x < r[:, 2]) & (y >= r[:, 1]) & (y < r[:, 3])

    def counts(self, points):
        """Number of points inside each patch (a point in two patches counts for both)."""
        return self.membership(points).sum(axis=0).astype(np.int64)

    def to_dict(self):
        return {
            'width': self.width,
            'height': self.height,
            'base_rows': self.base_rows,
            'base_cols': self.base_cols,
            'centroidal': self.centroidal,
            'count': self.count,
        }

    def __repr__(self):
        return f'<PatchGrid {self.base_rows}x{self.base_cols} N_g={self.count}>'


@dataclass(frozen=True)
class PsfrConfig:
    """Stage-1 parameters (patch grid, seeding, retention events and LK tracking)."""

    m: int = 20
    max_corners: int = 400
    rho: float = 8.0
    tau_r: float = 0.5
    k_min: int = None
    grid_rows: int = 4
    grid_cols: int = 4
    centroidal: bool = True
    quality: float = 0.01
    lk_win: int = 21
    lk_levels: int = 3
    lk_max_iters: int = 30
    lk_eps: float = 0.03
    lk_fb_thresh: float = 1.0
    min_patch_tracks: int = 2
    confirm_steps: int = 2

    def __post_init__(self):
        if self.m < 1:
            raise InvalidConfig('m must be at least 1')
        if self.max_corners < self.m:
            raise InvalidConfig('global corner cap C must be at least m')
        if not 0.0 < self.tau_r < 1.0:
            raise InvalidConfig('retention threshold tau_r must lie in (0, 1)')
        if self.rho < 0:
            raise InvalidConfig('dedup radius must be non-negative')
        if self.grid_rows < 1 or self.grid_cols < 1:
            raise InvalidConfig('grid dimensions must be positive')
        if not 0.0 < self.quality <= 1.0:
            raise InvalidConfig('corner quality must lie in (0, 1]')
        if self.lk_win < 3 or self.lk_levels < 1 or self.lk_max_iters < 1:
            raise InvalidConfig('invalid Lucas-Kanade parameters')
        if self.k_min is not None and not 1 <= self.k_min <= self.patch_count:
            raise InvalidConfig(f'k_min must lie in [1, {self.patch_count}]')
        if self.min_patch_tracks < 1 or self.confirm_steps < 0:
            raise InvalidConfig('min_patch_tracks must be >= 1 and confirm_steps >= 0')

    @property
    def patch_count(self):
        n = self.grid_rows * self.grid_cols
        if self.centroidal:
            n += (self.grid_rows - 1) * (self.grid_cols - 1)
        return n

    @property
    def effective_k_min(self):
        if self.k_min is not None:
            return self.k_min
        return max(1, math.ceil(0.4 * self.patch_count))

    @property
    def border_margin(self):
        """Distance from the frame border inside which tracks are rejected."""
        return self.lk_win // 2

    @classmethod
    def from_config(cls, settings):
        """Build from a resolved configuration mapping."""
        return cls(
            m=int(settings['MAX_PER_PATCH']),
            max_corners=int(settings['MAX_CORNERS']),
            rho=float(settings['DEDUP_RADIUS']),
            tau_r=float(settings['RETENTION_THRESHOLD']),
            k_min=None if settings.get('K_MIN') is None else int(settings['K_MIN']),
            grid_rows=int(settings['GRID_ROWS']),
            grid_cols=int(settings['GRID_COLS']),
            centroidal=bool(settings['CENTROIDAL']),
            quality=float(settings['CORNER_QUALITY']),
            lk_win=int(settings['LK_WIN']),
            lk_levels=int(settings['LK_LEVELS']),
            lk_max_iters=int(settings['LK_MAX_ITERS']),
            lk_eps=float(settings['LK_EPS']),
            lk_fb_thresh=float(settings['LK_FB_THRESH']),
            min_patch_tracks=int(settings['MIN_PATCH_TRACKS']),
            confirm_steps=int(settings['CONFIRM_STEPS']),
        )

    def to_dict(self):
        return {
            'm': self.m,
            'C': self.max_corners,
            'rho': self.rho,
            'tau_r': self.tau_r,
            'k_min': self.effective_k_min,
            'grid': [self.grid_rows, self.grid_cols],
            'centroidal': self.centroidal,
            'quality': self.quality,
            'min_patch_tracks': self.min_patch_tracks,
            'confirm_steps': self.confirm_steps,
            'lk': {
                'win': self.lk_win,
                'levels': self.lk_levels,
                'max_iters': self.lk_max_iters,
                'eps': self.lk_eps,
                'fb_thresh': self.lk_fb_thresh,
            },
        }


@dataclass(frozen=True, eq=False)
class TrackerState:
    """
    Reseed time tau, current corner set P and per-patch denominators n_j^tau.

    A freshly seeded state is confirming: anchors holds the seed positions still being
    tracked, confirm_left the frames to go, and the denominators stay zero until then.
    """

    tau: int
    corners: tuple
    denominators: np.ndarray
    anchors: Optional[np.ndarray] = None
    confirm_left: int = 0

    @property
    def active_patches(self):
        return int(np.count_nonzero(self.denominators))

    @property
    def confirming(self):
        return self.confirm_left > 0

    def __repr__(self):
        flag = f' confirming={self.confirm_left}' if self.confirming else ''
        return f'<TrackerState tau={self.tau} corners={len(self.corners)} active={self.active_patches}{flag}>'


@dataclass(frozen=True, eq=False)
class PsfrFrameOutcome:
    """
    Stage-1 result for frame t.

    ratios holds NaN for patches whose denominator is zero.
    """

    t: int
    survivors: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.float32))
    per_patch_counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    ratios: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.float64))
    low_retention: int = 0
    is_event: bool = False
    motion_mag: float = 0.0

    @classmethod
    def sentinel(cls, t, patch_count):
        """Outcome for the first frame: nothing tracked yet, never an event."""
        return cls(
            t=t,
            per_patch_counts=np.zeros(patch_count, dtype=np.int64),
            ratios=np.full(patch_count, np.nan),
        )

    @property
    def survivor_count(self):
        return len(self.survivors)

    def to_dict(self):
        """Event-log line for this frame."""
        return {
            't': int(self.t),
            'L': int(self.low_retention),
            'event': bool(self.is_event),
            'survivors': int(self.survivor_count),
            'motion': float(self.motion_mag),
        }

    def __repr__(self):
        flag = ' event' if self.is_event else ''
        return f'<PsfrFrameOutcome t={self.t} L={self.low_retention}{flag}>'
