"""Stage-2 input construction: raw cues, robust normalization, histograms and the PSFC cache."""
import logging
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from psfr.errors import CorruptCache, InvalidConfig, PreconditionError
from psfr.models.signals import (
    MOTION_COLUMN, RAW_DIM, SIGNAL_COLUMNS, SIGNAL_DIM, RawCues, SignalTrack,
)
from psfr.models.vision import HIST_DIM
from psfr.services.tracker_service import MIN_FRAME_SIDE, TrackerService
from psfr.services.vision_service import VisionService

logger = logging.getLogger(__name__)

PSFC_MAGIC = b'PSFC'
PSFC_VERSION = 1
PSFC_HEADER = struct.Struct('<4sIIIII')
CACHE_SUFFIX = '.psfc'


@dataclass(frozen=True)
class SignalConfig:
    """Stage-2 cue parameters."""

    central_frac: float = 0.5
    canny_lo: float = 50.0
    canny_hi: float = 150.0

    def __post_init__(self):
        if not 0.0 < self.central_frac <= 1.0:
            raise InvalidConfig('central_frac must lie in (0, 1]')
        if self.canny_lo >= self.canny_hi:
            raise InvalidConfig('Canny thresholds need lo < hi')

    @classmethod
    def from_config(cls, settings):
        return cls(
            central_frac=float(settings['CENTRAL_FRAC']),
            canny_lo=float(settings['CANNY_LO']),
            canny_hi=float(settings['CANNY_HI']),
        )


def normalize_column(values):
    """
    Percentile min-max normalization of one cue column into [0, 1].

    Uses the 5th/95th percentiles (linear interpolation). When they coincide the column's
    min/max are used instead; a constant column maps to 0.5.
    """
    x = np.asarray(values, dtype=np.float64)
    lo, hi = np.percentile(x, [5.0, 95.0])
    if hi <= lo:
        lo, hi = float(x.min()), float(x.max())
        if hi <= lo:
            return np.full(x.shape, 0.5)
    return np.clip((x - lo) / (hi - lo), 0.0, 1.0)


class SignalService:
    """Signal extraction and cache operations."""

    @staticmethod
    def central_window(width, height, central_frac):
        """Centered square window (x0, y0, x1, y1) of side central_frac * min(W, H)."""
        side = central_frac * min(width, height)
        cx, cy = width / 2.0, height / 2.0
        return cx - side / 2.0, cy - side / 2.0, cx + side / 2.0, cy + side / 2.0

    @staticmethod
    def compute_raw_cues(frame, outcome, signal_cfg=None):
        """
        Raw cues of one frame.

        Args:
            frame: FrameBuffer of frame t
            outcome: PsfrFrameOutcome of the same frame
            signal_cfg: SignalConfig (defaults when omitted)

        Returns:
            RawCues
        """
        signal_cfg = signal_cfg or SignalConfig()
        if outcome.t != frame.index:
            raise PreconditionError(f'outcome for frame {outcome.t} paired with frame {frame.index}')
        pts = np.asarray(outcome.survivors, dtype=np.float64).reshape(-1, 2)
        x0, y0, x1, y1 = SignalService.central_window(frame.width, frame.height, signal_cfg.central_frac)
        central = (pts[:, 0] >= x0) & (pts[:, 0] < x1) & (pts[:, 1] >= y0) & (pts[:, 1] < y1)
        return RawCues(
            c=float(len(pts)),
            z=float(np.count_nonzero(central)),
            e=VisionService.canny_edge_density(frame.gray, signal_cfg.canny_lo, signal_cfg.canny_hi),
            H=VisionService.grayscale_entropy(frame.gray),
            m=float(outcome.motion_mag),
            L=float(outcome.low_retention),
        )

    @staticmethod
    def robust_normalize(raw):
        """
        Normalize the c, z, e, H and L columns of a (T, 6) raw block into a (T, 5) array.

        The motion column is not part of s_t.
        """
        raw = np.asarray(raw, dtype=np.float64)
        if raw.ndim != 2 or raw.shape[1] != RAW_DIM or len(raw) < 1:
            raise PreconditionError(f'raw cues must be a (T>=1, {RAW_DIM}) array, got {raw.shape}')
        return np.stack([normalize_column(raw[:, col]) for col in SIGNAL_COLUMNS], axis=1)

    @staticmethod
    def normalized_motion(raw):
        """Normalized motion cue from a raw block, same rule as the s_t columns."""
        return normalize_column(np.asarray(raw, dtype=np.float64)[:, MOTION_COLUMN])

    @staticmethod
    def extract_signals(src, cfg, signal_cfg=None, event_sink=None):
        """
        Run stage 1 over a video and build its SignalTrack.

        Args:
            src: VideoSource
            cfg: PsfrConfig
            signal_cfg: SignalConfig
            event_sink: Optional callable receiving every PsfrFrameOutcome
        """
        signal_cfg = signal_cfg or SignalConfig()
        if src.width and (src.width < MIN_FRAME_SIDE or src.height < MIN_FRAME_SIDE):
            raise PreconditionError(f'{src.video_id}: frames must be at least {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE}')

        raw_rows, hist_rows = [], []
        for frame, outcome in TrackerService.iter_video(src, cfg):
            raw_rows.append(SignalService.compute_raw_cues(frame, outcome, signal_cfg))
            hist_rows.append(VisionService.hsv_histogram(frame))
            if event_sink is not None:
                event_sink(outcome)

        raw = np.asarray(raw_rows, dtype=np.float64)
        return SignalTrack(
            S=SignalService.robust_normalize(raw),
            H=np.asarray(hist_rows),
            raw=raw,
            video_id=src.video_id,
        )

    @staticmethod
    def cache_path(cache_dir, video_id):
        return Path(cache_dir) / f'{video_id}{CACHE_SUFFIX}'

    @staticmethod
    def write_cache(track, path):
        """Write a SignalTrack as a PSFC file, atomically (temp file + rename)."""
        path = Path(path)
        header = PSFC_HEADER.pack(PSFC_MAGIC, PSFC_VERSION, track.count, SIGNAL_DIM, HIST_DIM, RAW_DIM)
        fd, tmp = tempfile.mkstemp(prefix=path.name, suffix='.tmp', dir=path.parent)
        try:
            with os.fdopen(fd, 'wb') as fh:
                fh.write(header)
                for block in (track.S, track.H, track.raw):
                    fh.write(np.ascontiguousarray(block, dtype='<f4').tobytes())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.remove(tmp)
            raise

    @staticmethod
    def read_cache(path, video_id=None):
        """
        Read a PSFC file.

        The video id defaults to the file name stem.
        """
        path = Path(path)
        data = path.read_bytes()
        if len(data) < PSFC_HEADER.size:
            raise CorruptCache(f'{path}: truncated header')
        magic, version, count, sdim, hdim, rdim = PSFC_HEADER.unpack_from(data)
        if magic != PSFC_MAGIC:
            raise CorruptCache(f'{path}: bad magic {magic!r}')
        if version != PSFC_VERSION:
            raise CorruptCache(f'{path}: unsupported version {version}')
        if (sdim, hdim, rdim) != (SIGNAL_DIM, HIST_DIM, RAW_DIM):
            raise CorruptCache(f'{path}: unexpected dimensions {(sdim, hdim, rdim)}')
        expected = PSFC_HEADER.size + 4 * count * (sdim + hdim + rdim)
        if len(data) != expected:
            raise CorruptCache(f'{path}: expected {expected} bytes, found {len(data)}')

        values = np.frombuffer(data, dtype='<f4', offset=PSFC_HEADER.size)
        s_end = count * sdim
        h_end = s_end + count * hdim
        return SignalTrack(
            S=values[:s_end].reshape(count, sdim),
            H=values[s_end:h_end].reshape(count, hdim),
            raw=values[h_end:].reshape(count, rdim),
            video_id=video_id if video_id is not None else path.stem,
        )
