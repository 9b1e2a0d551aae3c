"""Domain models."""
from psfr.models.frame import FrameBuffer, FrameRef, ResizeSpec, VideoSource
from psfr.models.vision import Corner, ImagePyramid, TrackResult
from psfr.models.tracker import PatchGrid, PsfrConfig, PsfrFrameOutcome, TrackerState
from psfr.models.signals import RawCues, SignalTrack
from psfr.models.selection import SelectionRequest, SelectionResult, SelectionStatus, SelectorParams
from psfr.models.evidence import EvidenceInstance, InstanceMetrics, MetricReport
from psfr.models.evolution import EvolveConfig, EvolveReport, Genome

__all__ = [
    'FrameBuffer', 'FrameRef', 'ResizeSpec', 'VideoSource',
    'Corner', 'ImagePyramid', 'TrackResult',
    'PatchGrid', 'PsfrConfig', 'PsfrFrameOutcome', 'TrackerState',
    'RawCues', 'SignalTrack',
    'SelectionRequest', 'SelectionResult', 'SelectionStatus', 'SelectorParams',
    'EvidenceInstance', 'InstanceMetrics', 'MetricReport',
    'EvolveConfig', 'EvolveReport', 'Genome',
]
