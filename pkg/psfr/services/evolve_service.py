"""Island-model search over selector parameters, scored by the combined objective."""
import json
import logging
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from psfr.errors import InvalidConfig, InvalidGenome, MissingSignals, PreconditionError
from psfr.models.evolution import GENES, EvolveConfig, EvolveReport, Genome
from psfr.models.selection import SelectionRequest, SelectorParams
from psfr.services.metrics_service import MetricsService
from psfr.services.selector_service import SelectorService
from psfr.services.signal_service import SignalService

logger = logging.getLogger(__name__)

TOURNAMENT_SIZE = 2
CHECKPOINT_VERSION = 1


class EvolveService:
    """Genome encoding, evaluation, mutation and the evolution loop."""

    # Encoding

    @staticmethod
    def params_to_genome(params, genome_id='', parent_id=None):
        """Flatten SelectorParams into a Genome; values outside the gene box are rejected."""
        values = (
            *params.w,
            params.w_change,
            params.lambda_div,
            params.nms_gap,
            params.w_motion,
            params.w_center,
            1.0 if params.slot_mode == 'cumulative-change' else 0.0,
            1.0 if params.peak_align else 0.0,
            1.0 if params.use_motion else 0.0,
        )
        genome = Genome(values=tuple(float(v) for v in values), id=genome_id, parent_id=parent_id)
        EvolveService.check_genome(genome)
        return genome

    @staticmethod
    def check_genome(genome):
        if len(genome.values) != len(GENES):
            raise InvalidGenome(f'expected {len(GENES)} genes, got {len(genome.values)}')
        for spec, value in zip(GENES, genome.values):
            if not np.isfinite(value) or not spec.low <= value <= spec.high:
                raise InvalidGenome(f'gene {spec.name}={value} outside [{spec.low}, {spec.high}]')
            if spec.kind == 'int' and value != int(value):
                raise InvalidGenome(f'gene {spec.name}={value} is not integral')
            if spec.kind == 'flag' and value not in (0.0, 1.0):
                raise InvalidGenome(f'flag gene {spec.name}={value} is not 0 or 1')

    @staticmethod
    def genome_to_params(genome):
        """Inverse of params_to_genome."""
        EvolveService.check_genome(genome)
        v = genome.values
        return SelectorParams(
            w=tuple(v[:5]),
            w_change=v[5],
            lambda_div=v[6],
            nms_gap=int(v[7]),
            w_motion=v[8],
            w_center=v[9],
            slot_mode='cumulative-change' if v[10] == 1.0 else 'uniform-time',
            peak_align=v[11] == 1.0,
            use_motion=v[12] == 1.0,
        )

    @staticmethod
    def random_genome(rng, genome_id=''):
        values = []
        for spec in GENES:
            if spec.kind == 'flag':
                values.append(float(rng.integers(0, 2)))
            elif spec.kind == 'int':
                values.append(float(rng.integers(int(spec.low), int(spec.high) + 1)))
            else:
                values.append(float(rng.uniform(spec.low, spec.high)))
        return Genome(values=tuple(values), id=genome_id)

    @staticmethod
    def mutate(genome, sigma, rng, flip_prob=0.05):
        """
        Gaussian mutation scaled by each gene's span, clamped to bounds.

        Integer genes are rounded after the draw; flag genes flip with flip_prob.
        """
        values = []
        for spec, value in zip(GENES, genome.values):
            if spec.kind == 'flag':
                flip = rng.random() < flip_prob
                values.append(1.0 - value if flip else value)
                continue
            moved = float(np.clip(value + rng.normal(0.0, sigma * spec.span), spec.low, spec.high))
            if spec.kind == 'int':
                moved = float(np.round(moved))
            values.append(moved)
        return Genome(values=tuple(values), parent_id=genome.id or None)

    # Evaluation

    @staticmethod
    def build_dataset(cache_dir, instances):
        """
        Pair every instance with its video's cached SignalTrack.

        Raises:
            MissingSignals: no cache file for a referenced video
            PreconditionError: an annotated index is outside the video
        """
        tracks = {}
        dataset = []
        for inst in instances:
            if inst.video_id not in tracks:
                path = SignalService.cache_path(cache_dir, inst.video_id)
                if not path.exists():
                    raise MissingSignals(inst.video_id)
                tracks[inst.video_id] = SignalService.read_cache(path, inst.video_id)
            track = tracks[inst.video_id]
            frames = set(inst.candidates).union(*inst.evidence_sets)
            if frames and (min(frames) < 0 or max(frames) >= track.count):
                raise PreconditionError(
                    f'instance {inst.instance_id} references frames outside 0..{track.count - 1}'
                )
            dataset.append((track, inst))
        return dataset

    @staticmethod
    def evaluate_report(genome, dataset, cfg):
        """MetricReport of the genome's selector over a dataset."""
        params = EvolveService.genome_to_params(genome)
        results, statuses, instances = [], [], []
        for track, inst in dataset:
            if track is None:
                raise MissingSignals(inst.video_id)
            req = SelectionRequest.from_track(track, inst.candidates, cfg.K)
            result, status = SelectorService.run_selector(req, 'psfr', params, cfg.timing_mode)
            results.append(result)
            statuses.append(status)
            instances.append(inst)
        return MetricsService.combined_objective(
            results, instances, K=cfg.K, t_max=cfg.T_max, alpha=cfg.alpha, gamma=cfg.gamma,
            objective=cfg.objective, statuses=statuses,
        )

    @staticmethod
    def evaluate_genome(genome, dataset, cfg):
        """Combined objective J of a genome."""
        return EvolveService.evaluate_report(genome, dataset, cfg).J

    # Search

    @staticmethod
    def island_rng(seed, island, generation):
        return np.random.default_rng([seed, island, generation])

    @staticmethod
    def initial_population(cfg, island):
        """Uniform-equivalent genome, the default genome, then random genomes."""
        rng = EvolveService.island_rng(cfg.seed, island, 0)
        seeds = [
            EvolveService.params_to_genome(SelectorParams.uniform()),
            EvolveService.params_to_genome(SelectorParams()),
        ]
        population = []
        for j in range(cfg.pop_per_island):
            gid = f'i{island}g0n{j}'
            if j < len(seeds):
                population.append(Genome(values=seeds[j].values, id=gid))
            else:
                population.append(EvolveService.random_genome(rng, gid))
        return population

    @staticmethod
    def tournament(population, scores, rng, k=TOURNAMENT_SIZE):
        """Best of k uniformly drawn members; ties go to the earlier draw."""
        picks = rng.integers(0, len(population), size=k)
        best = picks[0]
        for p in picks[1:]:
            if scores[p] > scores[best]:
                best = p
        return population[best]

    @staticmethod
    def update_archive(archive, scored, size):
        """Top-N distinct genomes by descending J; earlier entries win ties."""
        merged = list(archive) + list(scored)
        merged.sort(key=lambda item: -item[1])
        result, seen = [], set()
        for genome, J in merged:
            if genome.values in seen:
                continue
            seen.add(genome.values)
            result.append((genome, J))
            if len(result) == size:
                break
        return result

    @staticmethod
    def run_evolution(dataset, cfg=None, checkpoint=None, resume=None):
        """
        Evolve selector parameters on island populations.

        Args:
            dataset: List of (SignalTrack, EvidenceInstance)
            cfg: EvolveConfig
            checkpoint: Optional path rewritten after every generation
            resume: Optional checkpoint path to continue from

        Returns:
            EvolveReport
        """
        cfg = cfg or EvolveConfig()
        if not dataset:
            raise PreconditionError('evolution needs a non-empty dataset')
        started = time.perf_counter()
        memo = {}
        evaluations = 0

        def evaluate_all(genomes):
            nonlocal evaluations
            todo = list(dict.fromkeys(g.values for g in genomes if g.values not in memo))
            if todo:
                unscored = [Genome(values=v) for v in todo]
                if cfg.threads > 1 and len(unscored) > 1:
                    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                        scores = list(pool.map(lambda g: EvolveService.evaluate_genome(g, dataset, cfg), unscored))
                else:
                    scores = [EvolveService.evaluate_genome(g, dataset, cfg) for g in unscored]
                memo.update(zip(todo, scores))
                evaluations += len(todo)
            return [memo[g.values] for g in genomes]

        if resume is not None:
            state = EvolveService.load_checkpoint(resume, cfg)
            populations, archive, history = state['populations'], state['archive'], state['history']
            evaluations = state['evaluations']
            first = state['generation'] + 1
            for pop in populations:
                for genome, J in pop:
                    memo[genome.values] = J
            logger.info('resuming from generation %d', state['generation'])
        else:
            populations = []
            for i in range(cfg.islands):
                pop = EvolveService.initial_population(cfg, i)
                populations.append(pop)
            flat = [g for pop in populations for g in pop]
            scores = iter(evaluate_all(flat))
            populations = [[(g, next(scores)) for g in pop] for pop in populations]
            for i, pop in enumerate(populations):
                populations[i] = EvolveService._ranked(pop)
            archive = EvolveService.update_archive([], [s for pop in populations for s in pop], cfg.elite_archive_size)
            history = [archive[0][1]]
            first = 1
            EvolveService._log_generation(0, archive, evaluations)
            if checkpoint is not None:
                EvolveService.write_checkpoint(checkpoint, cfg, 0, populations, archive, history, evaluations)

        for gen in range(first, cfg.generations + 1):
            offspring = []
            for i, pop in enumerate(populations):
                rng = EvolveService.island_rng(cfg.seed, i, gen)
                members = [g for g, _ in pop]
                scores = [J for _, J in pop]
                children = []
                for j in range(cfg.pop_per_island):
                    parent = EvolveService.tournament(members, scores, rng)
                    child = EvolveService.mutate(parent, cfg.mutation_sigma, rng, cfg.flip_prob)
                    children.append(Genome(values=child.values, id=f'i{i}g{gen}n{j}', parent_id=parent.id))
                offspring.append(children)

            flat = [g for children in offspring for g in children]
            child_scores = iter(evaluate_all(flat))
            scored_children = [[(g, next(child_scores)) for g in children] for children in offspring]

            for i, pop in enumerate(populations):
                populations[i] = EvolveService._ranked(pop + scored_children[i])[:cfg.pop_per_island]

            if cfg.islands > 1 and gen % cfg.migration_interval == 0:
                EvolveService._migrate(populations)

            archive = EvolveService.update_archive(
                archive, [s for children in scored_children for s in children], cfg.elite_archive_size,
            )
            history.append(archive[0][1])
            EvolveService._log_generation(gen, archive, evaluations)
            if checkpoint is not None:
                EvolveService.write_checkpoint(checkpoint, cfg, gen, populations, archive, history, evaluations)

        best, best_J = archive[0]
        return EvolveReport(
            best=best,
            best_J=best_J,
            history=history,
            evaluations=evaluations,
            elapsed=time.perf_counter() - started,
            archive=archive,
            config=cfg,
        )

    @staticmethod
    def _ranked(scored):
        # Stable: incumbents stay ahead of equally scored newcomers
        return sorted(scored, key=lambda item: -item[1])

    @staticmethod
    def _migrate(populations):
        """Ring migration: each island's best replaces the worst member of the next island."""
        migrants = [pop[0] for pop in populations]
        for i, migrant in enumerate(migrants):
            target = populations[(i + 1) % len(populations)]
            if any(g.values == migrant[0].values for g, _ in target):
                continue
            target[-1] = migrant
            target.sort(key=lambda item: -item[1])

    @staticmethod
    def _log_generation(gen, archive, evaluations):
        logger.info('generation %d: best J=%.6f (%d evaluations)', gen, archive[0][1], evaluations)

    # Checkpoints

    @staticmethod
    def write_checkpoint(path, cfg, generation, populations, archive, history, evaluations):
        """Atomically write the full search state as JSON."""
        best, best_J = archive[0]
        data = {
            'version': CHECKPOINT_VERSION,
            'generation': generation,
            'best_params': EvolveService.genome_to_params(best).to_dict(),
            'best_J': best_J,
            'history': list(history),
            'evaluations': evaluations,
            'config': cfg.to_dict(),
            'archive': [{'genome': g.to_dict(), 'J': J} for g, J in archive],
            'populations': [[{'genome': g.to_dict(), 'J': J} for g, J in pop] for pop in populations],
        }
        write_json_atomic(path, data)

    @staticmethod
    def load_checkpoint(path, cfg):
        """Read a checkpoint written under a compatible configuration."""
        with open(path, encoding='utf-8') as fh:
            data = json.load(fh)
        if data.get('version') != CHECKPOINT_VERSION:
            raise InvalidConfig(f'{path}: unsupported checkpoint version')
        saved = data['config']
        for key in ('islands', 'pop_per_island', 'seed', 'K', 'objective'):
            if saved.get(key) != getattr(cfg, key):
                raise InvalidConfig(f'{path}: checkpoint {key}={saved.get(key)!r} differs from {getattr(cfg, key)!r}')

        def entries(items):
            return [(Genome.from_dict(item['genome']), float(item['J'])) for item in items]

        return {
            'generation': int(data['generation']),
            'history': [float(j) for j in data['history']],
            'evaluations': int(data['evaluations']),
            'archive': entries(data['archive']),
            'populations': [entries(pop) for pop in data['populations']],
        }


def write_json_atomic(path, data):
    """Write a JSON document through a temporary file in the target directory."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=path.name, suffix='.tmp', dir=path.parent)
    try:
        with os.fdopen(fd, 'w', encoding='utf-8') as fh:
            json.dump(data, fh, indent=2)
            fh.write('\n')
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
