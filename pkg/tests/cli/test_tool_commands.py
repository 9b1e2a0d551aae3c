"""Tests for the evolve, bench and synth commands and the command group."""
import json

import pytest

from psfr import __version__
from psfr.cli import cli
from psfr.services.signal_service import SignalService


def invoke(runner, *args):
    return runner.invoke(cli, ['--config', 'testing', *map(str, args)])


@pytest.mark.cli
class TestGroup:
    """Tests for help, version and configuration selection."""

    @pytest.mark.parametrize('command, flag', [
        ('signals', '--cache-dir'),
        ('select', '--selector'),
        ('eval', '--t-max'),
        ('evolve', '--islands'),
        ('bench', '--reps'),
        ('synth', '--seed'),
    ])
    def test_help(self, runner, command, flag):
        result = runner.invoke(cli, [command, '--help'])
        assert result.exit_code == 0
        assert flag in result.output

    def test_version(self, runner):
        result = runner.invoke(cli, ['--version'])
        assert result.exit_code == 0
        assert __version__ in result.output

    def test_unknown_option(self, runner):
        assert runner.invoke(cli, ['select', '--frobnicate']).exit_code == 2

    def test_unknown_config_key(self, runner, corpus, cache_dir, tmp_path):
        config_file = tmp_path / 'run.json'
        config_file.write_text(json.dumps({'colour': 'red'}))
        result = runner.invoke(cli, ['--config-file', str(config_file), 'select', '--cache-dir', str(cache_dir),
                                     '--annotations', str(corpus['annotations'])])
        assert result.exit_code == 2


@pytest.mark.cli
class TestEvolveCommand:
    """Tests for evolve."""

    def test_report(self, runner, corpus, cache_dir, tmp_path):
        out = tmp_path / 'report.json'
        checkpoint = tmp_path / 'state.json'
        result = invoke(runner, 'evolve', '--cache-dir', cache_dir, '--annotations', corpus['annotations'],
                        '--islands', 2, '--pop', 3, '--generations', 2, '--seed', 5,
                        '--checkpoint', checkpoint, '--out', out)
        assert result.exit_code == 0, result.stderr
        assert '✓ best J=' in result.output
        report = json.loads(out.read_text())
        assert len(report['history']) == 3
        assert report['best_J'] == report['history'][-1]
        assert report['config']['timing_mode'] == 'zero'
        assert set(report['best_params']) >= {'w', 'nms_gap', 'slot_mode'}
        assert json.loads(checkpoint.read_text())['generation'] == 2

    def test_report_feeds_select(self, runner, corpus, cache_dir, tmp_path):
        """An evolution report is accepted as a --params file."""
        out = tmp_path / 'report.json'
        invoke(runner, 'evolve', '--cache-dir', cache_dir, '--annotations', corpus['annotations'],
               '--islands', 1, '--pop', 2, '--generations', 1, '--out', out)
        result = invoke(runner, 'select', '--cache-dir', cache_dir, '--annotations', corpus['annotations'],
                        '--params', out)
        assert result.exit_code == 0
        assert len(result.output.splitlines()) == 3

    def test_missing_cache(self, runner, corpus, tmp_path):
        result = invoke(runner, 'evolve', '--cache-dir', tmp_path, '--annotations', corpus['annotations'],
                        '--generations', 0)
        assert result.exit_code == 1
        assert 'no signal cache' in result.stderr


@pytest.mark.cli
class TestBenchCommand:
    """Tests for bench."""

    def test_cached_video(self, runner, cache_dir):
        result = invoke(runner, 'bench', SignalService.cache_path(cache_dir, 'three'), '--reps', 3, '--json')
        assert result.exit_code == 0
        lines = result.output.splitlines()
        assert lines[1].startswith('selection: ') and ' ± ' in lines[1]
        assert json.loads(lines[-1])['selection_s_per_video']['reps'] == 3

    def test_corrupt_cache(self, runner, tmp_path):
        path = tmp_path / 'broken.psfc'
        path.write_bytes(b'PSFC')
        result = invoke(runner, 'bench', path)
        assert result.exit_code == 1


@pytest.mark.cli
class TestSynthCommand:
    """Tests for synth."""

    def test_generates_corpus(self, runner, tmp_path):
        spec = tmp_path / 'spec.json'
        spec.write_text(json.dumps({'width': 32, 'height': 24, 'scenes': [{'frames': 3}, {'frames': 3}]}))
        result = invoke(runner, 'synth', spec, '--out', tmp_path / 'corpus', '--seed', 2)
        assert result.exit_code == 0
        assert len(list((tmp_path / 'corpus' / 'video000').glob('*.png'))) == 6
        assert (tmp_path / 'corpus' / 'annotations.jsonl').exists()

    def test_invalid_spec(self, runner, tmp_path):
        spec = tmp_path / 'spec.json'
        spec.write_text(json.dumps({'scenes': [{'frames': 3, 'texture': 'plasma'}, {'frames': 3}]}))
        result = invoke(runner, 'synth', spec, '--out', tmp_path / 'corpus')
        assert result.exit_code == 2
        assert 'plasma' in result.stderr

    def test_malformed_json(self, runner, tmp_path):
        spec = tmp_path / 'spec.json'
        spec.write_text('{"scenes": ')
        assert invoke(runner, 'synth', spec, '--out', tmp_path / 'corpus').exit_code == 2
