"""Stage 1: patchwise corner-track retention and event detection."""
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from psfr.errors import DimensionMismatch, PreconditionError
from psfr.models.tracker import PatchGrid, PsfrFrameOutcome, TrackerState
from psfr.models.vision import Corner, corners_to_array
from psfr.services.media_service import MediaService
from psfr.services.vision_service import VisionService

logger = logging.getLogger(__name__)

MIN_FRAME_SIDE = 16
# Padding around a patch crop so Sobel and box sums see real neighbours
CROP_PAD = 2


class TrackerService:
    """Stage-1 PSFR operations."""

    @staticmethod
    def build_grid(width, height, cfg):
        """
        Build the patch grid for a frame size.

        Base patches tile the frame exactly (edges at floor(i * W / cols)); centroidal
        patches have base-patch size and are centered on interior grid crossings.
        """
        if width < MIN_FRAME_SIDE or height < MIN_FRAME_SIDE:
            raise PreconditionError(f'frames must be at least {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE}')
        rows, cols = cfg.grid_rows, cfg.grid_cols
        xs = [(i * width) // cols for i in range(cols + 1)]
        ys = [(j * height) // rows for j in range(rows + 1)]

        rects = [(xs[i], ys[j], xs[i + 1], ys[j + 1]) for j in range(rows) for i in range(cols)]
        if cfg.centroidal:
            pw, ph = width // cols, height // rows
            for j in range(1, rows):
                for i in range(1, cols):
                    x0 = xs[i] - pw // 2
                    y0 = ys[j] - ph // 2
                    rects.append((x0, y0, x0 + pw, y0 + ph))

        return PatchGrid(
            width=width, height=height, base_rows=rows, base_cols=cols,
            centroidal=cfg.centroidal, rects=np.asarray(rects, dtype=np.int64),
        )

    @staticmethod
    def detect_patch_corners(gray, grid, cfg, response=None):
        """
        Up to m fresh corners per patch, away from the tracking border margin.

        Corners must also clear quality x the strongest response of the whole frame, so
        textureless patches stay empty.
        """
        if response is None:
            response = VisionService.corner_response(gray)
        height, width = gray.shape
        margin = cfg.border_margin
        inner = response[margin:height - margin, margin:width - margin]
        floor = cfg.quality * float(inner.max(initial=0.0))
        if floor <= 0.0:
            return []

        found = []
        for x0, y0, x1, y1 in grid.rects:
            x0, y0 = max(x0, margin), max(y0, margin)
            x1, y1 = min(x1, width - margin), min(y1, height - margin)
            if x1 - x0 < 1 or y1 - y0 < 1:
                continue
            cx0, cy0 = max(x0 - CROP_PAD, 0), max(y0 - CROP_PAD, 0)
            cx1, cy1 = min(x1 + CROP_PAD, width), min(y1 + CROP_PAD, height)
            crop = np.ascontiguousarray(gray[cy0:cy1, cx0:cx1])
            if crop.shape[0] < MIN_FRAME_SIDE or crop.shape[1] < MIN_FRAME_SIDE:
                continue
            mask = np.zeros_like(crop)
            mask[y0 - cy0:y1 - cy0, x0 - cx0:x1 - cx0] = 255
            for c in VisionService.shi_tomasi_corners(crop, cfg.m, cfg.quality, cfg.rho, mask=mask):
                x, y = c.x + cx0, c.y + cy0
                score = float(response[int(y), int(x)])
                if score >= floor:
                    found.append(Corner(x, y, score))
        return found

    @staticmethod
    def seed_corners(frame, grid, existing, cfg, response=None):
        """
        Merge existing points with fresh per-patch detections.

        Existing points are considered first (re-scored on this frame), then new
        detections by descending response. A point is kept when it is at least rho from
        every kept point, every patch containing it holds fewer than m points, and fewer
        than C points are kept. Returns corners sorted by descending response.
        """
        if (frame.width, frame.height) != (grid.width, grid.height):
            raise DimensionMismatch('frame does not match the patch grid')
        if response is None:
            response = VisionService.corner_response(frame.gray)

        old = []
        for c in existing:
            xi = min(max(int(round(c.x)), 0), frame.width - 1)
            yi = min(max(int(round(c.y)), 0), frame.height - 1)
            old.append(Corner(float(c.x), float(c.y), float(response[yi, xi])))
        old.sort(key=lambda c: (-c.response, c.y, c.x))
        fresh = TrackerService.detect_patch_corners(frame.gray, grid, cfg, response)
        fresh.sort(key=lambda c: (-c.response, c.y, c.x))

        pool = old + fresh
        if not pool:
            return []
        positions = corners_to_array(pool).astype(np.float64)
        membership = grid.membership(positions)

        kept = []
        kept_xy = np.empty((min(len(pool), cfg.max_corners), 2))
        per_patch = np.zeros(grid.count, dtype=np.int64)
        rho_sq = cfg.rho * cfg.rho
        for i, corner in enumerate(pool):
            if len(kept) >= cfg.max_corners:
                break
            inside = membership[i]
            if not inside.any() or np.any(per_patch[inside] >= cfg.m):
                continue
            if kept:
                d = kept_xy[:len(kept)] - positions[i]
                nearest = np.min(np.einsum('ij,ij->i', d, d))
                if nearest < rho_sq or nearest == 0.0:
                    continue
            kept_xy[len(kept)] = positions[i]
            kept.append(corner)
            per_patch[inside] += 1

        # Stable: equal responses keep their merge order
        kept.sort(key=lambda c: -c.response)
        return kept

    @staticmethod
    def retention_ratios(survivors, grid, denominators, tau_r):
        """
        Per-patch retention r_j = c_j / n_j and the low-retention count L.

        Args:
            survivors: (N, 2) accepted track positions in frame t+1
            grid: PatchGrid
            denominators: (N_g,) counts n_j at the last reseed
            tau_r: Retention threshold

        Returns:
            Tuple of (ratios with NaN where n_j = 0, L, counts c_j)
        """
        denominators = np.asarray(denominators, dtype=np.int64)
        if len(denominators) != grid.count:
            raise PreconditionError(f'expected {grid.count} denominators, got {len(denominators)}')
        counts = grid.counts(survivors)
        active = denominators > 0
        ratios = np.full(grid.count, np.nan)
        ratios[active] = counts[active] / denominators[active]
        low = int(np.count_nonzero(active & (np.nan_to_num(ratios, nan=np.inf) < tau_r)))
        return ratios, low, counts

    @staticmethod
    def confirmed_denominators(anchors, grid, cfg):
        """Per-patch anchor counts; patches holding fewer than min_patch_tracks count as inactive."""
        counts = grid.counts(anchors)
        counts[counts < cfg.min_patch_tracks] = 0
        return counts

    @staticmethod
    def reseeded_state(tau, corners, grid, cfg):
        """State for a fresh corner set; denominators wait for confirmation unless confirm_steps is 0."""
        positions = corners_to_array(corners)
        if cfg.confirm_steps == 0:
            return TrackerState(
                tau=tau, corners=tuple(corners),
                denominators=TrackerService.confirmed_denominators(positions, grid, cfg),
            )
        return TrackerState(
            tau=tau, corners=tuple(corners), denominators=np.zeros(grid.count, dtype=np.int64),
            anchors=positions, confirm_left=cfg.confirm_steps,
        )

    @staticmethod
    def initial_state(frame, cfg, grid=None):
        """Seed corners on the first frame; tau = frame index."""
        if grid is None:
            grid = TrackerService.build_grid(frame.width, frame.height, cfg)
        corners = TrackerService.seed_corners(frame, grid, (), cfg)
        return TrackerService.reseeded_state(frame.index, corners, grid, cfg)

    @staticmethod
    def is_event(low_retention, active, cfg):
        """L >= min(k_min, active patches), with at least one active patch."""
        return active >= 1 and low_retention >= min(cfg.effective_k_min, active)

    @staticmethod
    def step(state, prev, next, cfg, grid=None):
        """
        Track the state's corners from prev into next and update the state.

        On an event tau moves to next.index and the refreshed corner set starts a new
        confirmation; a confirming state advances its anchors; otherwise only the corner
        set is refreshed.

        Returns:
            Tuple of (new TrackerState, PsfrFrameOutcome for next)
        """
        new_state, outcome, _ = TrackerService._advance(state, prev, next, cfg, grid)
        return new_state, outcome

    @staticmethod
    def _track(prev_pyr, next_pyr, points, cfg):
        return VisionService.lk_track(
            prev_pyr, next_pyr, points,
            win=cfg.lk_win, levels=cfg.lk_levels, max_iters=cfg.lk_max_iters,
            eps=cfg.lk_eps, fb_thresh=cfg.lk_fb_thresh,
        )

    @staticmethod
    def _confirm(state, prev_pyr, next_pyr, corners, grid, cfg):
        anchors = TrackerService._track(prev_pyr, next_pyr, state.anchors, cfg).accepted
        if state.confirm_left > 1:
            return TrackerState(
                tau=state.tau, corners=tuple(corners), denominators=state.denominators,
                anchors=anchors, confirm_left=state.confirm_left - 1,
            )
        denominators = TrackerService.confirmed_denominators(anchors, grid, cfg)
        if not denominators.any():
            # Nothing survived: confirm the current corner set instead
            return TrackerService.reseeded_state(state.tau, corners, grid, cfg)
        return TrackerState(tau=state.tau, corners=tuple(corners), denominators=denominators)

    @staticmethod
    def _advance(state, prev, next, cfg, grid=None, prev_pyramid=None):
        if prev.shape != next.shape:
            raise DimensionMismatch(f'frame {next.index} is {next.width}x{next.height}, expected {prev.width}x{prev.height}')
        if grid is None:
            grid = TrackerService.build_grid(next.width, next.height, cfg)

        prev_pyr = prev_pyramid if prev_pyramid is not None else VisionService.build_pyramid(prev.gray, cfg.lk_levels)
        next_pyr = VisionService.build_pyramid(next.gray, cfg.lk_levels)
        track = TrackerService._track(prev_pyr, next_pyr, state.corners, cfg)
        survivors = track.accepted
        ratios, low, counts = TrackerService.retention_ratios(survivors, grid, state.denominators, cfg.tau_r)
        event = TrackerService.is_event(low, state.active_patches, cfg)

        if len(survivors):
            start = corners_to_array(state.corners)[track.status]
            motion = float(np.mean(np.linalg.norm(survivors - start, axis=1)))
        else:
            motion = 0.0

        carried = [Corner(float(x), float(y)) for x, y in survivors]
        corners = TrackerService.seed_corners(next, grid, carried, cfg)
        if event:
            new_state = TrackerService.reseeded_state(next.index, corners, grid, cfg)
            logger.debug('event at frame %d (L=%d, active=%d)', next.index, low, state.active_patches)
        elif state.confirming:
            new_state = TrackerService._confirm(state, prev_pyr, next_pyr, corners, grid, cfg)
        else:
            new_state = TrackerState(tau=state.tau, corners=tuple(corners), denominators=state.denominators)

        outcome = PsfrFrameOutcome(
            t=next.index,
            survivors=survivors,
            per_patch_counts=counts,
            ratios=ratios,
            low_retention=low,
            is_event=event,
            motion_mag=motion,
        )
        return new_state, outcome, next_pyr

    @staticmethod
    def iter_frames(src):
        """Yield frames in order, decoding frame t+1 while frame t is processed."""
        with ThreadPoolExecutor(max_workers=1) as pool:
            pending = pool.submit(MediaService.load_frame, src, 0)
            for t in range(src.count):
                frame = pending.result()
                if t + 1 < src.count:
                    pending = pool.submit(MediaService.load_frame, src, t + 1)
                yield frame

    @staticmethod
    def iter_video(src, cfg):
        """Yield (frame, outcome) for every frame; frame 0 gets the sentinel outcome."""
        state = grid = prev = pyramid = None
        for frame in TrackerService.iter_frames(src):
            if prev is None:
                grid = TrackerService.build_grid(frame.width, frame.height, cfg)
                state = TrackerService.initial_state(frame, cfg, grid)
                outcome = PsfrFrameOutcome.sentinel(frame.index, grid.count)
            else:
                state, outcome, pyramid = TrackerService._advance(state, prev, frame, cfg, grid, pyramid)
            prev = frame
            yield frame, outcome

    @staticmethod
    def run_video(src, cfg):
        """Outcomes for every frame of a video (index 0 is the sentinel)."""
        outcomes = [outcome for _, outcome in TrackerService.iter_video(src, cfg)]
        events = sum(1 for o in outcomes if o.is_event)
        logger.info('%s: %d frames, %d events', src.video_id or 'video', len(outcomes), events)
        return outcomes
