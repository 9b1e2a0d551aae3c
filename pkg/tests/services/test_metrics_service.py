"""Tests for MetricsService."""
import json
import math
from fractions import Fraction

import numpy as np
import pytest

from psfr.errors import AlignmentError, CorruptAnnotations, InvalidConfig, MissingWeight, PreconditionError
from psfr.models.evidence import EvidenceInstance
from psfr.models.selection import SelectionResult, SelectionStatus
from psfr.services.metrics_service import MetricsService


def instance(groups, candidates=None, weights=None, instance_id='q'):
    groups = tuple(frozenset(g) for g in groups)
    if candidates is None:
        candidates = sorted(set().union(*groups)) if groups else []
    return EvidenceInstance(instance_id=instance_id, video_id='v', candidates=tuple(candidates),
                            evidence_sets=groups, weights=weights)


def reference_metrics(selected, groups, weights):
    """Exhaustive per-set evaluation with plain loops over exact rationals."""
    n = len(selected)
    incl = 1
    inter = f_score = w_inter = None
    for g in groups:
        hits = 0
        for t in selected:
            for u in g:
                if t == u:
                    hits += 1
        incl = min(incl, 1 if hits > 0 else 0)
        p = Fraction(hits, n) if n else Fraction(0)
        r = Fraction(hits, len(g))
        f = Fraction(0) if hits == 0 else (1 + 2) * p * r / (2 * p + r)
        covered = Fraction(0)
        total = Fraction(0)
        for u in g:
            total += Fraction(weights[u])
            if u in selected:
                covered += Fraction(weights[u])
        w = covered / total
        inter = p if inter is None else min(inter, p)
        f_score = f if f_score is None else min(f_score, f)
        w_inter = w if w_inter is None else min(w_inter, w)
    if n == 0:
        incl, inter, f_score = 0, Fraction(0), Fraction(0)
    return float(incl), float(inter), float(f_score), float(w_inter)


class TestSetMetrics:
    """Tests for inclusion, intersection, F_sqrt2 and weighted intersection."""

    @pytest.mark.parametrize('selected, groups, expected', [
        ({1, 5}, [{5, 6}, {9}], 0.0),
        ({1, 5}, [{5}, {1, 2}], 1.0),
        (set(), [{1}], 0.0),
    ])
    def test_inclusion(self, selected, groups, expected):
        assert MetricsService.inclusion(selected, instance(groups)) == expected

    @pytest.mark.parametrize('selected, groups, expected', [
        ({1, 2, 3, 4}, [{1, 2}], 0.5),
        ({3, 4}, [{3, 4}], 1.0),
        ({1, 2}, [{1, 2}, {2}], 0.5),
        (set(), [{1}], 0.0),
    ])
    def test_intersection(self, selected, groups, expected):
        assert MetricsService.intersection(selected, instance(groups)) == expected

    @pytest.mark.parametrize('selected, groups, expected', [
        ({1, 2}, [{1, 2}], 1.0),
        ({1, 2}, [{1}], 0.75),
        ({3}, [{1}], 0.0),
    ])
    def test_f_sqrt2(self, selected, groups, expected):
        """P = 0.5, R = 1 gives 3 * 0.5 / 2 = 0.75."""
        assert MetricsService.f_sqrt2(selected, instance(groups)) == expected

    def test_f_sqrt2_between_precision_and_recall(self):
        inst = instance([{1, 2, 3}])
        selected = {1, 7, 8, 9}
        p, r = 0.25, 1 / 3
        assert min(p, r) <= MetricsService.f_sqrt2(selected, inst) <= max(p, r)

    @pytest.mark.parametrize('selected, weights, expected', [
        ({1, 2, 3}, None, 1.0),
        ({1}, {1: 3.0, 2: 1.0}, 0.75),
        ({5}, {1: 3.0, 2: 1.0}, 0.0),
    ])
    def test_weighted_intersection(self, selected, weights, expected):
        assert MetricsService.weighted_intersection(selected, instance([{1, 2}], weights=weights)) == expected

    def test_missing_weight(self):
        with pytest.raises(MissingWeight):
            MetricsService.weighted_intersection({1}, instance([{1, 2}], weights={1: 1.0}))

    def test_no_evidence(self):
        with pytest.raises(PreconditionError):
            MetricsService.inclusion({1}, instance([]))

    def test_permutation_invariance(self):
        a = instance([{1, 2}, {5}, {7, 8, 9}])
        b = instance([{7, 8, 9}, {1, 2}, {5}])
        selected = {1, 7, 4}
        for metric in (MetricsService.inclusion, MetricsService.intersection,
                       MetricsService.f_sqrt2, MetricsService.weighted_intersection):
            assert metric(selected, a) == metric(selected, b)

    def test_inclusion_monotone(self):
        inst = instance([{2}, {6, 7}])
        selected = set()
        previous = 0.0
        for t in (0, 6, 3, 2, 9):
            selected.add(t)
            value = MetricsService.inclusion(selected, inst)
            assert value >= previous
            previous = value
        assert previous == 1.0

    def test_matches_exhaustive_reference(self):
        """1000 random small instances agree exactly with the reference."""
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            T = int(rng.integers(1, 21))
            groups = []
            for _ in range(int(rng.integers(1, 4))):
                size = int(rng.integers(1, min(T, 6) + 1))
                groups.append(set(int(t) for t in rng.choice(T, size=size, replace=False)))
            frames = sorted(set().union(*groups))
            weights = {t: float(rng.integers(1, 10)) / 4 for t in frames}
            selected = set(int(t) for t in rng.choice(T, size=int(rng.integers(0, min(T, 8) + 1)), replace=False))
            inst = instance(groups, candidates=range(T), weights=weights)
            actual = (
                MetricsService.inclusion(selected, inst),
                MetricsService.intersection(selected, inst),
                MetricsService.f_sqrt2(selected, inst),
                MetricsService.weighted_intersection(selected, inst),
            )
            assert actual == reference_metrics(selected, groups, weights)


class TestTimeFactor:
    """Tests for the smooth time penalty."""

    def test_values(self):
        assert MetricsService.time_factor(0.0) == 1.0
        assert MetricsService.time_factor(15.0) == 0.95
        assert MetricsService.time_factor(30.0) == 0.95
        assert MetricsService.time_factor(7.5) == pytest.approx(math.sqrt(0.95), abs=1e-6)

    def test_non_increasing(self):
        values = [MetricsService.time_factor(t, gamma=2.0) for t in np.linspace(0, 20, 41)]
        assert all(b <= a for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize('kwargs', [{'alpha': 0.0}, {'alpha': 1.5}, {'gamma': 0.0}, {'t_max': 0.0}])
    def test_invalid_params(self, kwargs):
        with pytest.raises(InvalidConfig):
            MetricsService.time_factor(1.0, **kwargs)

    def test_negative_time(self):
        with pytest.raises(PreconditionError):
            MetricsService.time_factor(-1.0)


class TestCombinedObjective:
    """Tests for J."""

    def test_one_instance_at_cap(self):
        """Inclusion 1 at t = T_max contributes exactly alpha."""
        report = MetricsService.combined_objective([SelectionResult((5,), 15.0)], [instance([{5}])])
        assert report.J == 0.95
        assert report.n == 1

    def test_all_invalid(self):
        inst = instance([{5}], candidates=[5, 6])
        results = [SelectionResult((9,), 0.0), None]
        report = MetricsService.combined_objective(results, [inst, instance([{5}], instance_id='r')])
        assert report.J == 0.0
        assert report.invalid == 2
        assert [row.status for row in report.rows] == ['OutOfCandidates', 'SelectorFailed']

    def test_mean_of_contributions(self):
        insts = [instance([{1}], candidates=[1, 2], instance_id='a'),
                 instance([{1}], candidates=[1, 2], instance_id='b')]
        report = MetricsService.combined_objective([SelectionResult((1,)), SelectionResult((2,))], insts)
        assert report.J == 0.5

    def test_budget_and_time_guards(self):
        inst = instance([{1}], candidates=range(10))
        over_budget = MetricsService.combined_objective([SelectionResult((1, 2, 3))], [inst], K=2)
        too_slow = MetricsService.combined_objective([SelectionResult((1,), 16.0)], [inst])
        assert over_budget.rows[0].status == 'BudgetExceeded'
        assert too_slow.rows[0].status == 'TimeExceeded'
        assert over_budget.J == too_slow.J == 0.0

    def test_given_status_overrides(self):
        """A writer-side failure zeroes an otherwise admissible selection."""
        report = MetricsService.combined_objective(
            [SelectionResult((5,))], [instance([{5}])], statuses=[SelectionStatus.FAILED],
        )
        assert report.J == 0.0

    def test_unsupervised_dropped(self):
        """Results may align with the full list or with the supervised subset."""
        insts = [instance([{1}], instance_id='a'), instance([], candidates=[1], instance_id='b')]
        full = MetricsService.combined_objective([SelectionResult((1,)), SelectionResult((1,))], insts)
        subset = MetricsService.combined_objective([SelectionResult((1,))], insts)
        assert full.J == subset.J == 1.0
        assert full.dropped == subset.dropped == 1
        assert full.n == 1

    def test_alignment_error(self):
        with pytest.raises(AlignmentError):
            MetricsService.combined_objective([], [instance([{1}]), instance([{2}], instance_id='r')])

    @pytest.mark.parametrize('objective, expected', [
        ('inclusion', 1.0),
        ('intersection', 0.5),
        ('f_sqrt2', 0.75),
        ('w_intersection', 1.0),
    ])
    def test_objective_choice(self, objective, expected):
        report = MetricsService.combined_objective(
            [SelectionResult((1, 2))], [instance([{1}], candidates=[1, 2])], objective=objective,
        )
        assert report.J == expected

    def test_partial_weights_need_weighted_objective(self):
        """Missing weights only matter when the weighted intersection is the objective."""
        inst = instance([{1, 2}], candidates=[1, 2], weights={1: 1.0})
        report = MetricsService.combined_objective([SelectionResult((1,))], [inst], objective='inclusion')
        assert report.J == 0.0
        assert report.rows[0].w_intersection is None
        assert report.rows[0].intersection == 0.5
        with pytest.raises(MissingWeight):
            MetricsService.combined_objective([SelectionResult((1,))], [inst], objective='w_intersection')

    def test_invalid_rows_score_weighted_zero(self):
        inst = instance([{5}], candidates=[5], weights={5: 1.0})
        report = MetricsService.combined_objective([None], [inst], objective='w_intersection')
        assert report.rows[0].w_intersection == 0.0
        assert report.to_dict()['w_inter'] == 0.0

    def test_unknown_objective(self):
        with pytest.raises(InvalidConfig):
            MetricsService.combined_objective([], [], objective='accuracy')


class TestFiles:
    """Tests for annotation and selection files."""

    def _write(self, path, records):
        path.write_text(''.join(json.dumps(r) + '\n' for r in records))
        return path

    def test_load_annotations(self, tmp_path):
        path = self._write(tmp_path / 'a.jsonl', [
            {'instance_id': 'a', 'video_id': 'v', 'candidates': [0, 1], 'evidence_sets': [[1]]},
            {'instance_id': 'b', 'video_id': 'v', 'candidates': [0, 1], 'evidence_sets': []},
        ])
        instances, dropped = MetricsService.load_annotations(path)
        assert [i.instance_id for i in instances] == ['a']
        assert dropped == 1
        kept, _ = MetricsService.load_annotations(path, keep_unsupervised=True)
        assert len(kept) == 2

    def test_duplicate_ids(self, tmp_path):
        record = {'instance_id': 'a', 'video_id': 'v', 'evidence_sets': [[1]]}
        with pytest.raises(CorruptAnnotations):
            MetricsService.load_annotations(self._write(tmp_path / 'a.jsonl', [record, record]))

    def test_bad_line(self, tmp_path):
        path = tmp_path / 'a.jsonl'
        path.write_text('{"instance_id": "a", "video_id": "v"}\nnot json\n')
        with pytest.raises(CorruptAnnotations):
            MetricsService.load_annotations(path)

    def test_load_selections(self, tmp_path):
        path = self._write(tmp_path / 's.jsonl', [
            {'instance_id': 'a', 'selected': [1, 4], 'elapsed_s': 0.5, 'valid': True},
            {'instance_id': 'b', 'selected': [], 'elapsed_s': 0.0, 'valid': False},
        ])
        selections = MetricsService.load_selections(path)
        assert selections['a'] == (SelectionResult((1, 4), 0.5), SelectionStatus.OK)
        assert selections['b'][1] is SelectionStatus.FAILED

    def test_negative_weight(self, tmp_path):
        record = {'instance_id': 'a', 'video_id': 'v', 'evidence_sets': [[1]], 'weights': {'1': -2.0}}
        with pytest.raises(CorruptAnnotations, match='a.jsonl:1'):
            MetricsService.load_annotations(self._write(tmp_path / 'a.jsonl', [record]))
