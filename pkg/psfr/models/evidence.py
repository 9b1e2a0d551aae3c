"""Evidence annotation and metric report models."""
import math
from dataclasses import dataclass, field
from typing import Optional

from psfr.errors import CorruptAnnotations


@dataclass(frozen=True)
class EvidenceInstance:
    """One oracle instance q: candidates A_q and alternative evidence sets G_{q,m}."""

    instance_id: str
    video_id: str
    candidates: tuple
    evidence_sets: tuple
    weights: Optional[dict] = None

    @classmethod
    def from_dict(cls, data):
        """
        Parse one annotation line.

        Empty evidence sets are discarded; the caller decides what to do with an
        instance left without any (see has_supervision).
        """
        weights = data.get('weights')
        if weights is not None:
            weights = {int(frame): float(value) for frame, value in weights.items()}
            bad = sorted(frame for frame, value in weights.items() if not value >= 0.0 or math.isinf(value))
            if bad:
                raise CorruptAnnotations(f'instance {data.get("instance_id")}: invalid weights for frames {bad}')
        evidence = tuple(
            frozenset(int(t) for t in group)
            for group in data.get('evidence_sets') or ()
            if group
        )
        return cls(
            instance_id=str(data['instance_id']),
            video_id=str(data['video_id']),
            candidates=tuple(sorted({int(t) for t in data.get('candidates', ())})),
            evidence_sets=evidence,
            weights=weights,
        )

    @property
    def has_supervision(self):
        return len(self.evidence_sets) > 0

    def to_dict(self):
        data = {
            'instance_id': self.instance_id,
            'video_id': self.video_id,
            'candidates': list(self.candidates),
            'evidence_sets': [sorted(group) for group in self.evidence_sets],
        }
        if self.weights is not None:
            data['weights'] = {str(k): v for k, v in sorted(self.weights.items())}
        return data


@dataclass(frozen=True)
class InstanceMetrics:
    """Per-instance metric row."""

    instance_id: str
    inclusion: float = 0.0
    intersection: float = 0.0
    f_sqrt2: float = 0.0
    w_intersection: Optional[float] = None
    time_factor: float = 0.0
    contribution: float = 0.0
    status: str = 'ok'

    @property
    def valid(self):
        return self.status == 'ok'

    def to_dict(self):
        return {
            'instance_id': self.instance_id,
            'incl': self.inclusion,
            'inter': self.intersection,
            'f_sqrt2': self.f_sqrt2,
            'w_inter': self.w_intersection,
            'time_factor': self.time_factor,
            'contribution': self.contribution,
            'status': self.status,
        }


@dataclass(frozen=True)
class MetricReport:
    """Dataset-level oracle report; J is the mean contribution."""

    rows: tuple = field(default_factory=tuple)
    J: float = 0.0
    objective: str = 'inclusion'
    dropped: int = 0

    @property
    def n(self):
        return len(self.rows)

    @property
    def invalid(self):
        return sum(1 for row in self.rows if not row.valid)

    def mean(self, attribute):
        """Mean over the rows that carry the metric; None when none of them does."""
        if not self.rows:
            return 0.0
        values = [getattr(row, attribute) for row in self.rows]
        values = [v for v in values if v is not None]
        if not values:
            return None
        return sum(values) / len(values)

    def to_dict(self, include_rows=True, config=None):
        data = {
            'J': self.J,
            'incl': self.mean('inclusion'),
            'inter': self.mean('intersection'),
            'f_sqrt2': self.mean('f_sqrt2'),
            'w_inter': self.mean('w_intersection'),
            'n': self.n,
            'invalid': self.invalid,
            'dropped': self.dropped,
            'objective': self.objective,
        }
        if config is not None:
            data['config'] = config
        if include_rows:
            data['instances'] = [row.to_dict() for row in self.rows]
        return data

    def __repr__(self):
        return f'<MetricReport J={self.J:.4f} n={self.n} invalid={self.invalid}>'
