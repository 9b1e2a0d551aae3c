"""
PSFR command line
=================
One command per pipeline stage; each stage reads the previous stage's files.

Usage:
    python run.py <command> [options]

Available commands:
    - signals: extract and cache per-frame signals for frame directories
    - select: run a selector over annotated instances
    - eval: score selections against evidence annotations
    - evolve: search selector parameters on cached signals
    - bench: time extraction and selection
    - synth: write a synthetic corpus with known evidence

Exit codes: 0 success, 1 data or processing failure, 2 usage error.
"""
import dataclasses
import functools
import json
import logging
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from config import config
from psfr import __version__, create_app
from psfr.errors import InvalidConfig, InvalidSynthSpec, PsfrError
from psfr.models.evolution import OBJECTIVES, TIMING_MODES, EvolveConfig
from psfr.models.frame import ResizeSpec
from psfr.models.selection import SelectionRequest, SelectionResult, SelectorParams
from psfr.models.tracker import PsfrConfig
from psfr.services.bench_service import BenchService
from psfr.services.evolve_service import EvolveService, write_json_atomic
from psfr.services.media_service import MediaService
from psfr.services.metrics_service import MetricsService
from psfr.services.selector_service import SELECTORS, SelectorService
from psfr.services.signal_service import SignalConfig, SignalService
from psfr.services.synth_service import FORMATS, SynthService

logger = logging.getLogger(__name__)

LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR')
HASH_SUFFIX = '.sha256'


class ProcessingFailed(click.ClickException):
    """Data or processing failure: exit code 1."""

    exit_code = 1

    def show(self, file=None):
        click.echo(f'❌ {self.format_message()}', err=True)


def handle_errors(func):
    """Map domain errors onto exit codes: bad configuration is a usage error."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (InvalidConfig, InvalidSynthSpec) as exc:
            raise click.UsageError(str(exc)) from exc
        except (PsfrError, OSError) as exc:
            raise ProcessingFailed(str(exc)) from exc
    return wrapper


def build_toolkit(ctx, **overrides):
    """Resolve configuration for a command: defaults < env < config file < flags."""
    root = ctx.find_root().obj or {}
    overrides['LOG_LEVEL'] = root.get('log_level')
    return create_app(root.get('config_name', 'default'), root.get('config_file'), overrides)


def write_text_atomic(path, text):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=path.name, suffix='.tmp', dir=path.parent)
    try:
        with os.fdopen(fd, 'w', encoding='utf-8') as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def emit(out, text):
    """Write to a file atomically, or echo when out is '-' or missing."""
    if out in (None, '-'):
        click.echo(text, nl=False)
    else:
        write_text_atomic(out, text)


def load_params(path):
    """SelectorParams from a parameter file or an evolution report (its best_params)."""
    if path is None:
        return SelectorParams()
    with open(path, encoding='utf-8') as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f'{path}: {exc}') from exc
    if not isinstance(data, dict):
        raise InvalidConfig(f'{path}: expected a JSON object')
    if 'best_params' in data:
        data = data['best_params']
    try:
        return SelectorParams.from_dict(data)
    except TypeError as exc:
        raise InvalidConfig(f'{path}: {exc}') from exc


def resize_spec(settings):
    if not settings['RESIZE']:
        return None
    return ResizeSpec(int(settings['FRAME_WIDTH']), int(settings['FRAME_HEIGHT']))


def resize_options(func):
    for option in reversed([
        click.option('--width', type=int, help='Working frame width (default from config)'),
        click.option('--height', type=int, help='Working frame height (default from config)'),
        click.option('--resize/--no-resize', default=None, help='Resize frames to the working size'),
    ]):
        func = option(func)
    return func


@click.group()
@click.option('--config', 'config_name', type=click.Choice(sorted(config)),
              default=lambda: os.environ.get('PSFR_CONFIG', 'default'), show_default='PSFR_CONFIG or default',
              help='Configuration class')
@click.option('--config-file', type=click.Path(exists=True, dir_okay=False),
              help='JSON document overriding configuration values')
@click.option('--log-level', type=click.Choice(LOG_LEVELS, case_sensitive=False), help='Logging level')
@click.version_option(__version__, prog_name='psfr')
@click.pass_context
def cli(ctx, config_name, config_file, log_level):
    """Patchwise sparse-flow keyframe toolkit."""
    ctx.obj = {'config_name': config_name, 'config_file': config_file, 'log_level': log_level}


# ============================================================================
# SIGNALS
# ============================================================================

@cli.command()
@click.argument('video_dirs', nargs=-1, required=True, type=click.Path(exists=True, file_okay=False))
@click.option('--cache-dir', required=True, type=click.Path(file_okay=False), help='Directory for .psfc files')
@click.option('--threads', type=click.IntRange(min=1), envvar='PSFR_THREADS', help='Videos processed in parallel')
@resize_options
@click.option('--event-log-dir', type=click.Path(file_okay=False), help='Write per-frame tracker JSON lines here')
@click.option('--max-per-patch', type=int, help='Corners per patch (m)')
@click.option('--max-corners', type=int, help='Global corner cap (C)')
@click.option('--dedup-radius', type=float, help='Minimum corner spacing in pixels')
@click.option('--retention-threshold', type=float, help='Retention threshold tau_r')
@click.option('--k-min', type=int, help='Low-retention patch count that triggers an event')
@click.option('--grid', nargs=2, type=int, default=None, help='Base grid ROWS COLS')
@click.option('--centroidal/--no-centroidal', default=None, help='Add centroidal patches')
@click.option('--force', is_flag=True, help='Recompute caches that are up to date')
@click.pass_context
@handle_errors
def signals(ctx, video_dirs, cache_dir, threads, width, height, resize, event_log_dir,
            max_per_patch, max_corners, dedup_radius, retention_threshold, k_min, grid,
            centroidal, force):
    """Extract per-frame signals for each VIDEO_DIR and cache them."""
    app = build_toolkit(
        ctx, THREADS=threads, FRAME_WIDTH=width, FRAME_HEIGHT=height, RESIZE=resize,
        MAX_PER_PATCH=max_per_patch, MAX_CORNERS=max_corners, DEDUP_RADIUS=dedup_radius,
        RETENTION_THRESHOLD=retention_threshold, K_MIN=k_min, CENTROIDAL=centroidal,
        GRID_ROWS=grid[0] if grid else None, GRID_COLS=grid[1] if grid else None,
    )
    settings = app.config
    cfg = PsfrConfig.from_config(settings)
    signal_cfg = SignalConfig.from_config(settings)
    resize_to = resize_spec(settings)

    names = [Path(d).name for d in video_dirs]
    if len(set(names)) != len(names):
        raise click.UsageError('video directories must have distinct names')
    cache_root = Path(cache_dir)
    cache_root.mkdir(parents=True, exist_ok=True)
    if event_log_dir:
        Path(event_log_dir).mkdir(parents=True, exist_ok=True)

    fingerprint = json.dumps({
        'psfr': cfg.to_dict(),
        'signals': dataclasses.asdict(signal_cfg),
        'resize': resize_to.to_dict() if resize_to else None,
    }, sort_keys=True).encode()

    def process(video_dir):
        started = time.perf_counter()
        src = MediaService.open_frame_dir(video_dir, resize_to)
        target = SignalService.cache_path(cache_root, src.video_id)
        sidecar = target.with_name(target.name + HASH_SUFFIX)
        digest = MediaService.content_hash(src, fingerprint)
        if not force and target.exists() and sidecar.exists() and sidecar.read_text().strip() == digest:
            return src.video_id, None, 0

        events = []
        track = SignalService.extract_signals(src, cfg, signal_cfg, events.append if event_log_dir else None)
        SignalService.write_cache(track, target)
        write_text_atomic(sidecar, digest + '\n')
        if event_log_dir:
            lines = ''.join(json.dumps(o.to_dict()) + '\n' for o in events)
            write_text_atomic(Path(event_log_dir) / f'{src.video_id}.events.jsonl', lines)
        return src.video_id, time.perf_counter() - started, track.count

    def attempt(video_dir):
        try:
            return process(video_dir), None
        except Exception as exc:
            logger.debug('failed on %s', video_dir, exc_info=True)
            return None, exc

    workers = max(1, int(settings['THREADS']))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        outcomes = list(pool.map(attempt, video_dirs))

    failures = []
    for video_dir, (done, error) in zip(video_dirs, outcomes):
        if error is not None:
            failures.append(Path(video_dir).name)
            click.echo(f'❌ {Path(video_dir).name}: {type(error).__name__}: {error}', err=True)
            continue
        video_id, elapsed, count = done
        if elapsed is None:
            click.echo(f'✓ {video_id}: up to date')
        else:
            click.echo(f'✓ {video_id}: {count} frames in {elapsed:.3f} s ({elapsed / count:.6f} s/frame)')

    if failures:
        raise ProcessingFailed(f'{len(failures)} of {len(video_dirs)} videos failed: {", ".join(failures)}')


# ============================================================================
# SELECT
# ============================================================================

@cli.command()
@click.option('--cache-dir', required=True, type=click.Path(exists=True, file_okay=False))
@click.option('--annotations', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--k', 'K', type=click.IntRange(min=1), help='Frame budget (default from config)')
@click.option('--selector', type=click.Choice(SELECTORS), help='Selector (default from config)')
@click.option('--params', 'params_file', type=click.Path(exists=True, dir_okay=False),
              help='SelectorParams JSON or an evolution report')
@click.option('--timing', type=click.Choice(TIMING_MODES), help='Elapsed-time measurement')
@click.option('--threads', type=click.IntRange(min=1), envvar='PSFR_THREADS', help='Instances selected in parallel')
@click.option('--out', default='-', type=click.Path(dir_okay=False, allow_dash=True), help='Output JSON Lines file')
@click.pass_context
@handle_errors
def select(ctx, cache_dir, annotations, K, selector, params_file, timing, threads, out):
    """Select keyframes for every annotated instance."""
    app = build_toolkit(ctx, K=K, SELECTOR=selector, TIMING=timing, THREADS=threads)
    settings = app.config
    K, selector, timing = int(settings['K']), settings['SELECTOR'], settings['TIMING']
    params = load_params(params_file)

    instances, _ = MetricsService.load_annotations(annotations)
    missing = sorted(
        inst.instance_id for inst in instances
        if not SignalService.cache_path(cache_dir, inst.video_id).exists()
    )
    if missing:
        raise ProcessingFailed(f'missing signal caches for instances: {", ".join(missing)}')
    dataset = EvolveService.build_dataset(cache_dir, instances)

    def run(item):
        track, inst = item
        req = SelectionRequest.from_track(track, inst.candidates, K)
        return SelectorService.run_selector(req, selector, params, timing)

    with ThreadPoolExecutor(max_workers=max(1, int(settings['THREADS']))) as pool:
        outcomes = list(pool.map(run, dataset))

    lines = []
    for (_, inst), (result, status) in zip(dataset, outcomes):
        result = result if result is not None else SelectionResult()
        lines.append(json.dumps(result.to_dict(inst.instance_id, status.ok)) + '\n')
    emit(out, ''.join(lines))
    logger.info('%d selections written (%s, K=%d)', len(lines), selector, K)


# ============================================================================
# EVAL
# ============================================================================

@cli.command('eval')
@click.option('--selections', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--annotations', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--alpha', type=float, help='Time-penalty floor (default 0.95)')
@click.option('--gamma', type=float, help='Time-penalty exponent (default 1)')
@click.option('--t-max', type=float, help='Per-instance time budget in seconds (default 15)')
@click.option('--k', 'K', type=click.IntRange(min=1), help='Frame budget used by the guard')
@click.option('--objective', type=click.Choice(OBJECTIVES), help='Metric multiplied by the time factor')
@click.option('--rows/--no-rows', default=True, help='Include per-instance rows')
@click.option('--out', default='-', type=click.Path(dir_okay=False, allow_dash=True))
@click.pass_context
@handle_errors
def evaluate(ctx, selections, annotations, alpha, gamma, t_max, K, objective, rows, out):
    """Score selections against evidence annotations."""
    app = build_toolkit(ctx, ALPHA=alpha, GAMMA=gamma, T_MAX=t_max, K=K, OBJECTIVE=objective)
    settings = app.config
    alpha, gamma, t_max = float(settings['ALPHA']), float(settings['GAMMA']), float(settings['T_MAX'])
    K, objective = int(settings['K']), settings['OBJECTIVE']
    MetricsService.check_time_params(t_max, alpha, gamma)

    instances, _ = MetricsService.load_annotations(annotations, keep_unsupervised=True)
    chosen = MetricsService.load_selections(selections)
    known = {inst.instance_id for inst in instances}
    unmatched = sorted(set(chosen) - known)
    unmatched += sorted(i.instance_id for i in instances if i.has_supervision and i.instance_id not in chosen)
    if unmatched:
        raise ProcessingFailed(f'unmatched instance ids: {", ".join(unmatched)}')

    empty = (SelectionResult(), None)
    pairs = [chosen.get(inst.instance_id, empty) for inst in instances]
    report = MetricsService.combined_objective(
        [r for r, _ in pairs], instances, K=K, t_max=t_max, alpha=alpha, gamma=gamma,
        objective=objective, statuses=[s for _, s in pairs],
    )
    echo = {'alpha': alpha, 'gamma': gamma, 'T_max': t_max, 'K': K, 'objective': objective}
    emit(out, json.dumps(report.to_dict(include_rows=rows, config=echo), indent=2) + '\n')
    logger.info('J=%.6f over %d instances (%d invalid, %d dropped)', report.J, report.n, report.invalid, report.dropped)


# ============================================================================
# EVOLVE
# ============================================================================

@cli.command()
@click.option('--cache-dir', required=True, type=click.Path(exists=True, file_okay=False))
@click.option('--annotations', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--islands', type=click.IntRange(min=1))
@click.option('--pop', 'pop_per_island', type=click.IntRange(min=2), help='Genomes per island')
@click.option('--generations', type=click.IntRange(min=0))
@click.option('--sigma', 'mutation_sigma', type=float, help='Mutation scale as a fraction of each gene range')
@click.option('--flip-prob', type=float, help='Flag-gene flip probability')
@click.option('--migration-interval', type=click.IntRange(min=1))
@click.option('--archive-size', type=click.IntRange(min=1))
@click.option('--seed', type=int)
@click.option('--t-max', type=float)
@click.option('--alpha', type=float)
@click.option('--gamma', type=float)
@click.option('--k', 'K', type=click.IntRange(min=1))
@click.option('--timing', type=click.Choice(TIMING_MODES))
@click.option('--objective', type=click.Choice(OBJECTIVES))
@click.option('--threads', type=click.IntRange(min=1), envvar='PSFR_THREADS', help='Parallel genome evaluations')
@click.option('--checkpoint', type=click.Path(dir_okay=False), help='Rewrite search state here every generation')
@click.option('--resume', type=click.Path(exists=True, dir_okay=False), help='Continue from a checkpoint')
@click.option('--out', default='-', type=click.Path(dir_okay=False, allow_dash=True))
@click.pass_context
@handle_errors
def evolve(ctx, cache_dir, annotations, islands, pop_per_island, generations, mutation_sigma,
           flip_prob, migration_interval, archive_size, seed, t_max, alpha, gamma, K, timing,
           objective, threads, checkpoint, resume, out):
    """Evolve selector parameters on cached signals."""
    app = build_toolkit(
        ctx, ISLANDS=islands, POP_PER_ISLAND=pop_per_island, GENERATIONS=generations,
        MUTATION_SIGMA=mutation_sigma, FLIP_PROB=flip_prob, MIGRATION_INTERVAL=migration_interval,
        ARCHIVE_SIZE=archive_size, SEED=seed, T_MAX=t_max, ALPHA=alpha, GAMMA=gamma, K=K,
        TIMING=timing, OBJECTIVE=objective, THREADS=threads,
    )
    cfg = EvolveConfig.from_config(app.config)
    MetricsService.check_time_params(cfg.T_max, cfg.alpha, cfg.gamma)

    instances, _ = MetricsService.load_annotations(annotations)
    if not instances:
        raise ProcessingFailed(f'{annotations}: no instances with evidence')
    dataset = EvolveService.build_dataset(cache_dir, instances)
    report = EvolveService.run_evolution(dataset, cfg, checkpoint=checkpoint, resume=resume)

    best_params = EvolveService.genome_to_params(report.best).to_dict()
    text = json.dumps(report.to_dict(best_params=best_params), indent=2) + '\n'
    if out in (None, '-'):
        click.echo(text, nl=False)
    else:
        write_json_atomic(out, report.to_dict(best_params=best_params))
        click.echo(f'✓ best J={report.best_J:.6f} after {report.evaluations} evaluations -> {out}')


# ============================================================================
# BENCH
# ============================================================================

@cli.command()
@click.argument('input_path', metavar='INPUT', type=click.Path(exists=True))
@click.option('--reps', default=5, show_default=True, type=click.IntRange(min=1))
@click.option('--k', 'K', type=click.IntRange(min=1))
@click.option('--selector', type=click.Choice(SELECTORS))
@click.option('--params', 'params_file', type=click.Path(exists=True, dir_okay=False))
@resize_options
@click.option('--json', 'as_json', is_flag=True, help='Also print the report as JSON')
@click.pass_context
@handle_errors
def bench(ctx, input_path, reps, K, selector, params_file, width, height, resize, as_json):
    """Time signal extraction (frame directories) and selection (directories or .psfc files)."""
    app = build_toolkit(ctx, K=K, SELECTOR=selector, FRAME_WIDTH=width, FRAME_HEIGHT=height, RESIZE=resize)
    settings = app.config
    report = BenchService.bench(
        input_path, reps, PsfrConfig.from_config(settings), SignalConfig.from_config(settings),
        resize=resize_spec(settings), K=int(settings['K']), selector=settings['SELECTOR'],
        params=load_params(params_file),
    )
    for line in report.lines():
        click.echo(line)
    if as_json:
        click.echo(json.dumps(report.to_dict()))


# ============================================================================
# SYNTH
# ============================================================================

@cli.command()
@click.argument('spec_file', type=click.Path(exists=True, dir_okay=False))
@click.option('--out', 'out_dir', required=True, type=click.Path(file_okay=False))
@click.option('--seed', type=int, help='Texture seed (default from config)')
@click.option('--format', 'fmt', default='png', show_default=True, type=click.Choice(FORMATS))
@click.pass_context
@handle_errors
def synth(ctx, spec_file, out_dir, seed, fmt):
    """Write a synthetic corpus described by SPEC_FILE."""
    app = build_toolkit(ctx, SEED=seed)
    with open(spec_file, encoding='utf-8') as fh:
        try:
            spec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise click.UsageError(f'{spec_file}: {exc}') from exc
    video_dirs, annotations = SynthService.generate(spec, out_dir, int(app.config['SEED']), fmt)
    for video_dir in video_dirs:
        click.echo(f'✓ {video_dir}')
    click.echo(f'✓ {annotations}')
