import os
from pathlib import Path

from dotenv import load_dotenv

basedir = Path(__file__).parent

load_dotenv(basedir / '.env')


def _env_bool(name, default):
    return os.environ.get(name, str(default)).lower() in ('1', 'true', 'yes', 'on')


class Config:
    """Base configuration class."""

    LOG_LEVEL = os.environ.get('PSFR_LOG_LEVEL', 'INFO')
    THREADS = int(os.environ.get('PSFR_THREADS', os.cpu_count() or 1))

    # Working resolution; not a value taken from any experiment
    FRAME_WIDTH = int(os.environ.get('PSFR_FRAME_WIDTH', 640))
    FRAME_HEIGHT = int(os.environ.get('PSFR_FRAME_HEIGHT', 480))
    RESIZE = _env_bool('PSFR_RESIZE', True)

    # Stage 1: patch grid and corner seeding
    GRID_ROWS = 4
    GRID_COLS = 4
    CENTROIDAL = True
    MAX_PER_PATCH = 20
    MAX_CORNERS = 400
    DEDUP_RADIUS = 8.0
    CORNER_QUALITY = 0.01
    RETENTION_THRESHOLD = 0.5
    K_MIN = None  # None resolves to ceil(0.4 * patch count)
    # A fresh seed set counts once its tracks survive CONFIRM_STEPS frames
    CONFIRM_STEPS = 2
    MIN_PATCH_TRACKS = 2

    # Stage 1: pyramidal Lucas-Kanade
    LK_WIN = 21
    LK_LEVELS = 3
    LK_MAX_ITERS = 30
    LK_EPS = 0.03
    LK_FB_THRESH = 1.0

    # Stage 2 cues
    CANNY_LO = 50.0
    CANNY_HI = 150.0
    CENTRAL_FRAC = 0.5

    # Selection and oracle evaluation
    K = 16
    SELECTOR = 'psfr'
    ALPHA = 0.95
    GAMMA = 1.0
    T_MAX = 15.0
    OBJECTIVE = 'inclusion'
    TIMING = os.environ.get('PSFR_TIMING', 'wallclock')

    # Selector-parameter evolution
    ISLANDS = 4
    POP_PER_ISLAND = 16
    GENERATIONS = 50
    MUTATION_SIGMA = 0.1
    FLIP_PROB = 0.05
    MIGRATION_INTERVAL = 5
    ARCHIVE_SIZE = 10
    SEED = int(os.environ.get('PSFR_SEED', 0))


class DevelopmentConfig(Config):
    """Development configuration."""
    LOG_LEVEL = os.environ.get('PSFR_LOG_LEVEL', 'DEBUG')


class TestingConfig(Config):
    """Testing configuration: single worker, reproducible timing."""
    THREADS = 1
    TIMING = 'zero'
    FRAME_WIDTH = 160
    FRAME_HEIGHT = 120


class ProductionConfig(Config):
    """Production configuration."""
    LOG_LEVEL = os.environ.get('PSFR_LOG_LEVEL', 'WARNING')


# Configuration dictionary
config = {
    'development': DevelopmentConfig,
    'testing': TestingConfig,
    'production': ProductionConfig,
    'default': Config
}
