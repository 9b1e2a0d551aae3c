"""Genome, evolution configuration and report models."""
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from psfr.errors import InvalidConfig

TIMING_MODES = ('wallclock', 'zero')
OBJECTIVES = ('inclusion', 'intersection', 'f_sqrt2', 'w_intersection')


class GeneSpec(NamedTuple):
    """Bounds and kind of one gene: 'real', 'int' (integral values) or 'flag' ({0, 1})."""

    name: str
    low: float
    high: float
    kind: str = 'real'

    @property
    def span(self):
        return self.high - self.low


GENES = (
    GeneSpec('w0', -1.0, 1.0),
    GeneSpec('w1', -1.0, 1.0),
    GeneSpec('w2', -1.0, 1.0),
    GeneSpec('w3', -1.0, 1.0),
    GeneSpec('w4', -1.0, 1.0),
    GeneSpec('w_change', 0.0, 2.0),
    GeneSpec('lambda_div', 0.0, 2.0),
    GeneSpec('nms_gap', 0.0, 30.0, 'int'),
    GeneSpec('w_motion', -1.0, 1.0),
    GeneSpec('w_center', 0.0, 2.0),
    GeneSpec('slot_mode', 0.0, 1.0, 'flag'),
    GeneSpec('peak_align', 0.0, 1.0, 'flag'),
    GeneSpec('use_motion', 0.0, 1.0, 'flag'),
)


@dataclass(frozen=True)
class Genome:
    """SelectorParams flattened to a bounded real vector (order of GENES)."""

    values: tuple
    id: str = ''
    parent_id: Optional[str] = None

    def to_dict(self):
        return {'id': self.id, 'parent_id': self.parent_id, 'values': list(self.values)}

    @classmethod
    def from_dict(cls, data):
        return cls(values=tuple(float(v) for v in data['values']),
                   id=data.get('id', ''), parent_id=data.get('parent_id'))


@dataclass(frozen=True)
class EvolveConfig:
    """Search hyperparameters and the evaluation contract (K, T_max, timing)."""

    islands: int = 4
    pop_per_island: int = 16
    generations: int = 50
    mutation_sigma: float = 0.1
    flip_prob: float = 0.05
    migration_interval: int = 5
    elite_archive_size: int = 10
    seed: int = 0
    T_max: float = 15.0
    alpha: float = 0.95
    gamma: float = 1.0
    K: int = 16
    timing_mode: str = 'wallclock'
    objective: str = 'inclusion'
    threads: int = 1

    def __post_init__(self):
        if self.islands < 1:
            raise InvalidConfig('islands must be at least 1')
        if self.pop_per_island < 2:
            raise InvalidConfig('population per island must be at least 2')
        if self.elite_archive_size < 1:
            raise InvalidConfig('archive size must be at least 1')
        if self.generations < 0 or self.migration_interval < 1:
            raise InvalidConfig('generations must be >= 0 and migration interval >= 1')
        if self.mutation_sigma < 0 or not 0.0 <= self.flip_prob <= 1.0:
            raise InvalidConfig('invalid mutation parameters')
        if self.timing_mode not in TIMING_MODES:
            raise InvalidConfig(f'timing mode must be one of {TIMING_MODES}')
        if self.objective not in OBJECTIVES:
            raise InvalidConfig(f'objective must be one of {OBJECTIVES}')
        if self.K < 1:
            raise InvalidConfig('K must be at least 1')

    @classmethod
    def from_config(cls, settings):
        """Build from a resolved configuration mapping."""
        return cls(
            islands=int(settings['ISLANDS']),
            pop_per_island=int(settings['POP_PER_ISLAND']),
            generations=int(settings['GENERATIONS']),
            mutation_sigma=float(settings['MUTATION_SIGMA']),
            flip_prob=float(settings['FLIP_PROB']),
            migration_interval=int(settings['MIGRATION_INTERVAL']),
            elite_archive_size=int(settings['ARCHIVE_SIZE']),
            seed=int(settings['SEED']),
            T_max=float(settings['T_MAX']),
            alpha=float(settings['ALPHA']),
            gamma=float(settings['GAMMA']),
            K=int(settings['K']),
            timing_mode=settings['TIMING'],
            objective=settings['OBJECTIVE'],
            threads=int(settings['THREADS']),
        )

    def to_dict(self):
        return {
            'islands': self.islands,
            'pop_per_island': self.pop_per_island,
            'generations': self.generations,
            'mutation_sigma': self.mutation_sigma,
            'flip_prob': self.flip_prob,
            'migration_interval': self.migration_interval,
            'elite_archive_size': self.elite_archive_size,
            'seed': self.seed,
            'T_max': self.T_max,
            'alpha': self.alpha,
            'gamma': self.gamma,
            'K': self.K,
            'timing_mode': self.timing_mode,
            'objective': self.objective,
        }


@dataclass
class EvolveReport:
    """Result of one evolution run; history holds the best J after every generation."""

    best: Genome
    best_J: float
    history: list = field(default_factory=list)
    evaluations: int = 0
    elapsed: float = 0.0
    archive: list = field(default_factory=list)
    config: Optional[EvolveConfig] = None

    def to_dict(self, best_params=None):
        data = {
            'best_params': best_params if best_params is not None else {},
            'best_genome': self.best.to_dict(),
            'best_J': self.best_J,
            'history': list(self.history),
            'evaluations': self.evaluations,
            'elapsed_s': self.elapsed,
            'archive': [{'genome': g.to_dict(), 'J': j} for g, j in self.archive],
        }
        if self.config is not None:
            data['config'] = self.config.to_dict()
        return data
