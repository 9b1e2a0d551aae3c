"""Timing of signal extraction and selection."""
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from psfr.errors import PreconditionError
from psfr.models.selection import SelectionRequest
from psfr.services.media_service import MediaService
from psfr.services.selector_service import SELECTORS, SelectorService
from psfr.services.signal_service import CACHE_SUFFIX, SignalService

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TimingStats:
    """Mean and population standard deviation of repeated timings, in seconds."""

    samples: tuple = field(default_factory=tuple)

    @property
    def mean(self):
        return float(np.mean(self.samples)) if self.samples else 0.0

    @property
    def std(self):
        return float(np.std(self.samples)) if self.samples else 0.0

    def format(self, unit='s'):
        return f'{self.mean:.6f} ± {self.std:.6f} {unit}'

    def to_dict(self):
        return {'mean': self.mean, 'std': self.std, 'reps': len(self.samples)}


@dataclass(frozen=True)
class BenchReport:
    input: str
    frames: int
    selector: str
    K: int
    selection: TimingStats
    extraction: Optional[TimingStats] = None

    def lines(self):
        out = [f'{self.input}: {self.frames} frames, selector={self.selector}, K={self.K}']
        if self.extraction is not None:
            out.append(f'extraction: {self.extraction.format("s/frame")}')
        out.append(f'selection: {self.selection.format("s/video")}')
        return out

    def to_dict(self):
        return {
            'input': self.input,
            'frames': self.frames,
            'selector': self.selector,
            'K': self.K,
            'extraction_s_per_frame': None if self.extraction is None else self.extraction.to_dict(),
            'selection_s_per_video': self.selection.to_dict(),
        }


class BenchService:
    """Repeated timing runs over one video or one cached signal file."""

    @staticmethod
    def bench(path, reps, cfg, signal_cfg=None, resize=None, K=16, selector='psfr', params=None):
        """
        Time extraction (frame directories only) and selection over reps runs.

        Args:
            path: Frame directory or .psfc cache file
            reps: Number of timed repetitions, at least 1
            cfg: PsfrConfig for extraction
            resize: Optional ResizeSpec for extraction

        Returns:
            BenchReport
        """
        if reps < 1:
            raise PreconditionError('reps must be at least 1')
        if selector not in SELECTORS:
            raise PreconditionError(f'unknown selector {selector!r}')
        path = Path(path)

        extraction = None
        if path.is_file() and path.name.endswith(CACHE_SUFFIX):
            track = SignalService.read_cache(path)
        else:
            src = MediaService.open_frame_dir(path, resize)
            per_frame = []
            track = None
            for rep in range(reps):
                start = time.perf_counter()
                track = SignalService.extract_signals(src, cfg, signal_cfg)
                per_frame.append((time.perf_counter() - start) / track.count)
                logger.debug('extraction rep %d: %.6f s/frame', rep, per_frame[-1])
            extraction = TimingStats(tuple(per_frame))

        req = SelectionRequest.from_track(track, K=K)
        samples = []
        for _ in range(reps):
            start = time.perf_counter()
            if selector == 'uniform':
                SelectorService.uniform_select(req)
            else:
                SelectorService.psfr_select(req, params)
            samples.append(time.perf_counter() - start)

        return BenchReport(
            input=str(path), frames=track.count, selector=selector, K=K,
            selection=TimingStats(tuple(samples)), extraction=extraction,
        )
