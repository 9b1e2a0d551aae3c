"""
Pytest configuration and fixtures.

The synthetic corpus and its signal caches are session-scoped: generated once and
shared read-only by every test that needs real frames.
"""
import cv2
import numpy as np
import pytest
from click.testing import CliRunner
from PIL import Image

from psfr import create_app
from psfr.models.frame import FrameBuffer
from psfr.models.tracker import PsfrConfig
from psfr.services.media_service import MediaService
from psfr.services.signal_service import SignalService
from psfr.services.synth_service import SynthService

CORPUS_WIDTH = 160
CORPUS_HEIGHT = 120
SCENE_FRAMES = 12


def textured_plane(width, height, seed=0):
    """Smoothed block noise: dense, well-conditioned corners."""
    rng = np.random.default_rng(seed)
    cells = rng.integers(0, 256, size=(height // 4 + 1, width // 4 + 1), dtype=np.uint8)
    plane = np.repeat(np.repeat(cells, 4, axis=0), 4, axis=1)[:height, :width]
    return cv2.GaussianBlur(np.ascontiguousarray(plane), (5, 5), 1.0)


def checkerboard(width, height, cell, lo=0, hi=255):
    yy, xx = np.indices((height, width))
    return np.where(((yy // cell) + (xx // cell)) % 2 == 0, lo, hi).astype(np.uint8)


def save_png(path, array):
    Image.fromarray(np.asarray(array, dtype=np.uint8)).save(path)


def three_scene_spec(frames=SCENE_FRAMES, width=CORPUS_WIDTH, height=CORPUS_HEIGHT):
    return {
        'width': width,
        'height': height,
        'videos': [
            {
                'video_id': 'three',
                'scenes': [
                    {'texture': 'noise', 'frames': frames, 'pan': [1, 0]},
                    {'texture': 'blobs', 'frames': frames},
                    {'texture': 'checker', 'frames': frames, 'pan': [0, 1]},
                ],
                'evidence': ['cut_frames', 'scene_midpoint'],
                'weights': 'centered',
            },
            {
                'video_id': 'two',
                'scenes': [
                    {'texture': 'blobs', 'frames': frames},
                    {'texture': 'noise', 'frames': frames},
                ],
                'evidence': 'cut_frames',
            },
        ],
    }


@pytest.fixture(scope='session', autouse=True)
def app():
    """Toolkit with the testing configuration; installs the log handler before any CLI run."""
    return create_app('testing')


@pytest.fixture(scope='function')
def psfr_cfg():
    return PsfrConfig()


@pytest.fixture(scope='function')
def runner():
    """Click test runner with stderr kept apart from stdout."""
    try:
        return CliRunner(mix_stderr=False)
    except TypeError:
        # click >= 8.2 dropped mix_stderr; stderr is always kept separate there.
        return CliRunner()


@pytest.fixture(scope='function')
def textured_frame():
    gray = textured_plane(CORPUS_WIDTH, CORPUS_HEIGHT, seed=7)
    return FrameBuffer(gray=gray, index=0)


@pytest.fixture(scope='function')
def frame_dir(tmp_path):
    """Factory writing planes as frame_00000.png... into a named directory."""
    def _write(name, planes):
        target = tmp_path / name
        target.mkdir()
        for t, plane in enumerate(planes):
            save_png(target / f'frame_{t:05d}.png', plane)
        return target
    return _write


@pytest.fixture(scope='session')
def corpus(tmp_path_factory):
    """Synthetic corpus: 'three' (cuts at 12 and 24) and 'two' (cut at 12)."""
    root = tmp_path_factory.mktemp('corpus')
    video_dirs, annotations = SynthService.generate(three_scene_spec(), root, seed=3)
    return {'root': root, 'videos': {d.name: d for d in video_dirs}, 'annotations': annotations}


@pytest.fixture(scope='session')
def cache_dir(corpus, tmp_path_factory):
    """Signal caches for every corpus video, default stage-1 parameters."""
    target = tmp_path_factory.mktemp('cache')
    cfg = PsfrConfig()
    for video_id, video_dir in corpus['videos'].items():
        src = MediaService.open_frame_dir(video_dir)
        track = SignalService.extract_signals(src, cfg)
        SignalService.write_cache(track, SignalService.cache_path(target, video_id))
    return target
