"""Tests for patch grid, tracker configuration and outcome models."""
import math

import numpy as np
import pytest

from psfr import create_app
from psfr.errors import InvalidConfig
from psfr.models.tracker import PsfrConfig, PsfrFrameOutcome, TrackerState
from psfr.services.tracker_service import TrackerService


class TestPsfrConfig:
    """Tests for stage-1 configuration."""

    def test_default_patch_count(self):
        """A 4x4 centroidal grid has 16 + 9 patches."""
        cfg = PsfrConfig()
        assert cfg.patch_count == 25
        assert PsfrConfig(centroidal=False).patch_count == 16

    def test_default_k_min(self):
        """k_min defaults to ceil(0.4 * N_g)."""
        assert PsfrConfig().effective_k_min == math.ceil(0.4 * 25) == 10
        assert PsfrConfig(k_min=3).effective_k_min == 3

    def test_border_margin(self):
        assert PsfrConfig(lk_win=21).border_margin == 10

    @pytest.mark.parametrize('changes', [
        {'m': 0},
        {'m': 30, 'max_corners': 20},
        {'tau_r': 1.0},
        {'tau_r': 0.0},
        {'k_min': 26},
        {'quality': 0.0},
    ])
    def test_invalid_values(self, changes):
        """Out-of-range parameters should raise InvalidConfig."""
        with pytest.raises(InvalidConfig):
            PsfrConfig(**changes)

    def test_from_config(self, app):
        """Should read the UPPER_CASE configuration keys."""
        cfg = PsfrConfig.from_config(create_app('testing', overrides={'GRID_ROWS': 2, 'K_MIN': 2}).config)
        assert cfg.grid_rows == 2
        assert cfg.k_min == 2
        assert cfg.m == app.config['MAX_PER_PATCH']


class TestPatchGrid:
    """Tests for PatchGrid membership."""

    def test_membership_half_open(self):
        """Rectangles are half-open: a point on the right edge belongs to the next patch."""
        grid = TrackerService.build_grid(64, 32, PsfrConfig(grid_rows=1, grid_cols=2, centroidal=False))
        member = grid.membership(np.array([[31.9, 5.0], [32.0, 5.0]]))
        assert member.tolist() == [[True, False], [False, True]]

    def test_point_in_two_patches_counts_twice(self):
        """Centroidal overlap: one point may count in a base and a centroidal patch."""
        grid = TrackerService.build_grid(64, 64, PsfrConfig(grid_rows=2, grid_cols=2))
        counts = grid.counts(np.array([[32.0, 32.0]]))
        assert counts.sum() == 2
        assert counts[-1] == 1

    def test_repr(self):
        grid = TrackerService.build_grid(64, 64, PsfrConfig(grid_rows=2, grid_cols=2))
        assert repr(grid) == '<PatchGrid 2x2 N_g=5>'


class TestOutcomes:
    """Tests for TrackerState and PsfrFrameOutcome."""

    def test_active_patches(self):
        state = TrackerState(tau=0, corners=(), denominators=np.array([0, 3, 1, 0]))
        assert state.active_patches == 2

    def test_sentinel(self):
        """The sentinel outcome tracks nothing and is never an event."""
        outcome = PsfrFrameOutcome.sentinel(0, 25)
        assert outcome.survivor_count == 0
        assert outcome.low_retention == 0
        assert not outcome.is_event
        assert np.isnan(outcome.ratios).all()

    def test_event_log_line(self):
        """to_dict should give the event-log fields."""
        outcome = PsfrFrameOutcome(t=5, survivors=np.zeros((3, 2), np.float32), low_retention=11,
                                   is_event=True, motion_mag=1.5)
        assert outcome.to_dict() == {'t': 5, 'L': 11, 'event': True, 'survivors': 3, 'motion': 1.5}
