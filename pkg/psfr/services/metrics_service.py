"""Oracle evaluation against frame-level evidence annotations."""
import json
import logging
import math
from dataclasses import replace
from fractions import Fraction

from psfr.errors import (
    AlignmentError, CorruptAnnotations, InvalidConfig, MissingWeight, PreconditionError,
)
from psfr.models.evidence import EvidenceInstance, InstanceMetrics, MetricReport
from psfr.models.evolution import OBJECTIVES
from psfr.models.selection import SelectionResult, SelectionStatus
from psfr.services.selector_service import SelectorService

logger = logging.getLogger(__name__)

# Metric attribute of InstanceMetrics per objective name
OBJECTIVE_ATTRS = {
    'inclusion': 'inclusion',
    'intersection': 'intersection',
    'f_sqrt2': 'f_sqrt2',
    'w_intersection': 'w_intersection',
}


def _evidence(inst):
    if not inst.evidence_sets:
        raise PreconditionError(f'instance {inst.instance_id} has no evidence sets')
    return inst.evidence_sets


class MetricsService:
    """
    Set metrics, the time penalty and the combined objective.

    Set metrics are computed on exact rationals and returned as floats, so equal
    inputs give equal outputs regardless of evaluation order.
    """

    @staticmethod
    def inclusion(selected, inst):
        """1 when every evidence set shares at least one frame with the selection."""
        chosen = set(selected)
        return float(all(chosen & group for group in _evidence(inst)))

    @staticmethod
    def intersection(selected, inst):
        """Worst-case precision: min over m of |S & G_m| / |S|."""
        chosen = set(selected)
        groups = _evidence(inst)
        if not chosen:
            return 0.0
        return float(min(Fraction(len(chosen & g), len(chosen)) for g in groups))

    @staticmethod
    def f_sqrt2(selected, inst):
        """Worst-case F-beta with beta^2 = 2: 3PR / (2P + R)."""
        chosen = set(selected)
        groups = _evidence(inst)
        if not chosen:
            return 0.0
        scores = []
        for g in groups:
            hit = len(chosen & g)
            if hit == 0:
                scores.append(Fraction(0))
                continue
            p = Fraction(hit, len(chosen))
            r = Fraction(hit, len(g))
            scores.append(3 * p * r / (2 * p + r))
        return float(min(scores))

    @staticmethod
    def weighted_intersection(selected, inst):
        """
        Worst-case share of evidence weight covered by the selection.

        Instances without weights use unit weights (plain recall).
        """
        chosen = set(selected)
        groups = _evidence(inst)
        scores = []
        for g in groups:
            if inst.weights is None:
                weights = {t: Fraction(1) for t in g}
            else:
                missing = sorted(t for t in g if t not in inst.weights)
                if missing:
                    raise MissingWeight(f'instance {inst.instance_id}: no weight for frames {missing}')
                weights = {t: Fraction(inst.weights[t]) for t in g}
            total = sum(weights.values())
            if total == 0:
                scores.append(Fraction(0))
                continue
            scores.append(sum(weights[t] for t in chosen & g) / total)
        return float(min(scores))

    @staticmethod
    def check_time_params(t_max, alpha, gamma):
        if not 0.0 < alpha <= 1.0:
            raise InvalidConfig(f'alpha must lie in (0, 1], got {alpha}')
        if gamma <= 0.0:
            raise InvalidConfig(f'gamma must be positive, got {gamma}')
        if t_max <= 0.0:
            raise InvalidConfig(f'T_max must be positive, got {t_max}')

    @staticmethod
    def time_factor(t, t_max=15.0, alpha=0.95, gamma=1.0):
        """
        Smooth time penalty alpha ** (clip(t / T_max, 0, 1) ** gamma).

        Equals 1 at t = 0 and exactly alpha from T_max on.
        """
        MetricsService.check_time_params(t_max, alpha, gamma)
        if t < 0:
            raise PreconditionError(f'elapsed time must be non-negative, got {t}')
        x = t / t_max
        if x <= 0.0:
            return 1.0
        if x >= 1.0:
            return float(alpha)
        return float(alpha ** (x ** gamma))

    @staticmethod
    def score_instance(result, inst, status, t_max=15.0, alpha=0.95, gamma=1.0, objective='inclusion'):
        """
        InstanceMetrics for one guarded selection; invalid selections score zero.

        Weighted intersection is only scored under that objective (None otherwise).
        """
        weighted = objective == 'w_intersection'
        if not status.ok:
            return InstanceMetrics(
                instance_id=inst.instance_id, status=status.value, w_intersection=0.0 if weighted else None,
            )
        selected = result.indices
        row = InstanceMetrics(
            instance_id=inst.instance_id,
            inclusion=MetricsService.inclusion(selected, inst),
            intersection=MetricsService.intersection(selected, inst),
            f_sqrt2=MetricsService.f_sqrt2(selected, inst),
            w_intersection=MetricsService.weighted_intersection(selected, inst) if weighted else None,
            time_factor=MetricsService.time_factor(result.elapsed, t_max, alpha, gamma),
        )
        contribution = getattr(row, OBJECTIVE_ATTRS[objective]) * row.time_factor
        return replace(row, contribution=contribution)

    @staticmethod
    def combined_objective(results, instances, K=16, t_max=15.0, alpha=0.95, gamma=1.0,
                           objective='inclusion', statuses=None):
        """
        Mean per-instance contribution metric(q) * phi(t_q).

        Instances without evidence sets are dropped. results may align with either the
        full instance list or the supervised subset.

        Args:
            results: SelectionResult (or None for a failed selector) per instance
            instances: EvidenceInstance list
            statuses: Optional pre-computed SelectionStatus per result, combined with the guard

        Returns:
            MetricReport
        """
        MetricsService.check_time_params(t_max, alpha, gamma)
        if objective not in OBJECTIVES:
            raise InvalidConfig(f'objective must be one of {OBJECTIVES}')
        results = list(results)
        instances = list(instances)
        statuses = list(statuses) if statuses is not None else [None] * len(results)
        if len(statuses) != len(results):
            raise AlignmentError('statuses and results differ in length')

        kept = [inst for inst in instances if inst.has_supervision]
        if len(results) == len(instances):
            pairs = [(r, s, inst) for r, s, inst in zip(results, statuses, instances) if inst.has_supervision]
        elif len(results) == len(kept):
            pairs = list(zip(results, statuses, kept))
        else:
            raise AlignmentError(f'{len(results)} results for {len(kept)} supervised instances')

        rows = []
        for result, given, inst in pairs:
            status = SelectorService.check_indices(result, inst.candidates, K, t_max)
            if status.ok and given is not None and not given.ok:
                status = given
            rows.append(MetricsService.score_instance(result, inst, status, t_max, alpha, gamma, objective))

        J = math.fsum(row.contribution for row in rows) / len(rows) if rows else 0.0
        report = MetricReport(rows=tuple(rows), J=J, objective=objective, dropped=len(instances) - len(kept))
        logger.debug('%r', report)
        return report

    @staticmethod
    def load_annotations(path, keep_unsupervised=False):
        """
        Read an annotation JSON Lines file.

        Args:
            path: JSON Lines file, one instance per line
            keep_unsupervised: Also return instances without evidence sets

        Returns:
            Tuple of (instances, number without evidence sets)
        """
        instances, dropped = [], 0
        seen = set()
        for lineno, data in _read_jsonl(path):
            try:
                inst = EvidenceInstance.from_dict(data)
            except (CorruptAnnotations, KeyError, TypeError, ValueError, AttributeError) as exc:
                raise CorruptAnnotations(f'{path}:{lineno}: {exc}') from exc
            if inst.instance_id in seen:
                raise CorruptAnnotations(f'{path}:{lineno}: duplicate instance_id {inst.instance_id!r}')
            seen.add(inst.instance_id)
            if not inst.has_supervision:
                dropped += 1
                if not keep_unsupervised:
                    continue
            instances.append(inst)
        if dropped:
            logger.info('%d instances without evidence sets', dropped)
        return instances, dropped

    @staticmethod
    def load_selections(path):
        """
        Read selector output lines.

        Returns:
            Dict instance_id -> (SelectionResult, SelectionStatus recorded by the writer)
        """
        selections = {}
        for lineno, data in _read_jsonl(path):
            try:
                result = SelectionResult(
                    indices=tuple(int(i) for i in data['selected']),
                    elapsed=float(data.get('elapsed_s', 0.0)),
                )
                instance_id = str(data['instance_id'])
            except (KeyError, TypeError, ValueError) as exc:
                raise CorruptAnnotations(f'{path}:{lineno}: {exc}') from exc
            status = SelectionStatus.OK if data.get('valid', True) else SelectionStatus.FAILED
            selections[instance_id] = (result, status)
        return selections


def _read_jsonl(path):
    with open(path, encoding='utf-8') as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorruptAnnotations(f'{path}:{lineno}: {exc}') from exc
            if not isinstance(data, dict):
                raise CorruptAnnotations(f'{path}:{lineno}: expected a JSON object')
            yield lineno, data
