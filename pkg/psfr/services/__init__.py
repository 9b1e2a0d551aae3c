"""Service layer initialization."""
from psfr.services.media_service import MediaService
from psfr.services.vision_service import VisionService
from psfr.services.tracker_service import TrackerService
from psfr.services.signal_service import SignalConfig, SignalService
from psfr.services.selector_service import SelectorService
from psfr.services.metrics_service import MetricsService
from psfr.services.evolve_service import EvolveService
from psfr.services.synth_service import SynthService
from psfr.services.bench_service import BenchService

__all__ = [
    'MediaService', 'VisionService', 'TrackerService', 'SignalConfig', 'SignalService',
    'SelectorService', 'MetricsService', 'EvolveService', 'SynthService', 'BenchService',
]
