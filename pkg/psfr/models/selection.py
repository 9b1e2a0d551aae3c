"""Selection request, selector parameter and result models."""
import enum
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from psfr.errors import InvalidConfig, PreconditionError

SLOT_MODES = ('uniform-time', 'cumulative-change')


@dataclass(frozen=True, eq=False)
class SelectionRequest:
    """Inputs of select(S_q, H_q, A_q, K); A is stored sorted and de-duplicated."""

    S: np.ndarray
    H: np.ndarray
    A: tuple
    K: int = 16
    raw: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.K < 1:
            raise PreconditionError('budget K must be at least 1')
        candidates = tuple(sorted({int(a) for a in self.A}))
        if candidates and (candidates[0] < 0 or candidates[-1] >= len(self.S)):
            raise PreconditionError(f'candidate indices must lie in [0, {len(self.S)})')
        if len(self.H) != len(self.S) or (self.raw is not None and len(self.raw) != len(self.S)):
            raise PreconditionError('S, H and raw must have the same number of rows')
        object.__setattr__(self, 'A', candidates)

    @classmethod
    def from_track(cls, track, candidates=None, K=16):
        """Request over a cached SignalTrack; all frames are candidates by default."""
        if candidates is None:
            candidates = range(track.count)
        return cls(S=track.S, H=track.H, A=tuple(candidates), K=K, raw=track.raw)

    @property
    def T(self):
        return len(self.S)


@dataclass(frozen=True)
class SelectorParams:
    """Free parameters of the stage-2 scoring family (the evolved genome)."""

    w: tuple = (0.25, 0.15, 0.2, 0.2, 0.2)
    w_change: float = 0.5
    lambda_div: float = 0.3
    nms_gap: int = 3
    slot_mode: str = 'cumulative-change'
    peak_align: bool = True
    use_motion: bool = False
    w_motion: float = 0.0
    w_center: float = 1.5

    def __post_init__(self):
        object.__setattr__(self, 'w', tuple(float(v) for v in self.w))
        if len(self.w) != 5 or not all(np.isfinite(self.w)):
            raise InvalidConfig('quality weights w must be 5 finite values')
        if self.nms_gap < 0:
            raise InvalidConfig('nms_gap must be non-negative')
        if self.lambda_div < 0:
            raise InvalidConfig('lambda_div must be non-negative')
        if self.slot_mode not in SLOT_MODES:
            raise InvalidConfig(f'slot_mode must be one of {SLOT_MODES}')
        if not all(np.isfinite((self.w_change, self.w_motion, self.w_center))):
            raise InvalidConfig('weights must be finite')
        if self.w_center < 0:
            raise InvalidConfig('w_center must be non-negative')

    @classmethod
    def uniform(cls):
        """Parameters under which psfr_select reproduces uniform_select."""
        return cls(
            w=(0.0,) * 5, w_change=0.0, lambda_div=0.0, nms_gap=0,
            slot_mode='uniform-time', peak_align=False, use_motion=False, w_motion=0.0,
            w_center=0.0,
        )

    @classmethod
    def from_dict(cls, data):
        known = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        unknown = set(data) - set(known)
        if unknown:
            raise InvalidConfig(f'unknown selector parameters: {", ".join(sorted(unknown))}')
        return cls(**known)

    def scaled(self, factor):
        """Copy with every score weight multiplied by factor."""
        return replace(
            self,
            w=tuple(v * factor for v in self.w),
            w_change=self.w_change * factor,
            lambda_div=self.lambda_div * factor,
            w_motion=self.w_motion * factor,
            w_center=self.w_center * factor,
        )

    def to_dict(self):
        return {
            'w': list(self.w),
            'w_change': self.w_change,
            'lambda_div': self.lambda_div,
            'nms_gap': self.nms_gap,
            'slot_mode': self.slot_mode,
            'peak_align': self.peak_align,
            'use_motion': self.use_motion,
            'w_motion': self.w_motion,
            'w_center': self.w_center,
        }


class SelectionStatus(enum.Enum):
    """Outcome of the output guard; anything but OK scores zero."""

    OK = 'ok'
    OUT_OF_CANDIDATES = 'OutOfCandidates'
    BUDGET_EXCEEDED = 'BudgetExceeded'
    DUPLICATE_INDICES = 'DuplicateIndices'
    TIME_EXCEEDED = 'TimeExceeded'
    FAILED = 'SelectorFailed'

    @property
    def ok(self):
        return self is SelectionStatus.OK


@dataclass(frozen=True)
class SelectionResult:
    """Selected indices S_q* and the selector's elapsed time t_q in seconds."""

    indices: tuple = field(default_factory=tuple)
    elapsed: float = 0.0

    def to_dict(self, instance_id=None, valid=None):
        data = {'selected': [int(i) for i in self.indices], 'elapsed_s': float(self.elapsed)}
        if instance_id is not None:
            data = {'instance_id': instance_id, **data}
        if valid is not None:
            data['valid'] = bool(valid)
        return data

    def __len__(self):
        return len(self.indices)
