"""Deterministic synthetic corpora: textured scenes with known cuts and evidence annotations."""
import json
import logging
from pathlib import Path

import cv2
import numpy as np
from PIL import Image

from psfr.errors import InvalidSynthSpec
from psfr.services.media_service import MediaService

logger = logging.getLogger(__name__)

TEXTURES = ('blobs', 'noise', 'checker', 'stripes')
EVIDENCE_RULES = ('cut_frames', 'scene_interior', 'scene_midpoint')
WEIGHT_RULES = ('uniform', 'centered')
FORMATS = ('png', 'pgry')
MIN_SIDE = 16
SATURATION = 200
# Hue bins of the 12-bin HSV histogram are 15 wide; scene k sits in bin (5k mod 12)
HUE_BIN = 15
HUE_STEP = 5


def scene_hue(k):
    return (HUE_STEP * k % 12) * HUE_BIN + HUE_BIN // 2


def _require(condition, message):
    if not condition:
        raise InvalidSynthSpec(message)


def _int_field(data, key, default=None, minimum=None):
    value = data.get(key, default)
    _require(isinstance(value, int) and not isinstance(value, bool), f'{key} must be an integer')
    if minimum is not None:
        _require(value >= minimum, f'{key} must be at least {minimum}')
    return value


class SynthService:
    """Synthetic corpus generation."""

    @staticmethod
    def parse_spec(spec):
        """
        Validate a corpus description and fill in defaults.

        Accepts {"width", "height", "videos": [...]} or a single video at top level.
        Each video: {"video_id", "scenes": [{"texture", "frames", "pan"}], "evidence",
        "weights", "candidate_stride"}.
        """
        _require(isinstance(spec, dict), 'spec must be a JSON object')
        width = _int_field(spec, 'width', 160, MIN_SIDE)
        height = _int_field(spec, 'height', 120, MIN_SIDE)
        videos = spec.get('videos')
        if videos is None:
            _require('scenes' in spec, 'spec needs "videos" or "scenes"')
            videos = [{key: spec[key] for key in spec if key not in ('width', 'height')}]
        _require(isinstance(videos, list) and videos, '"videos" must be a non-empty list')

        parsed, seen = [], set()
        for n, video in enumerate(videos):
            _require(isinstance(video, dict), f'video {n} must be an object')
            video_id = str(video.get('video_id', f'video{n:03d}'))
            _require(video_id not in seen, f'duplicate video_id {video_id!r}')
            _require(video_id and '/' not in video_id and video_id not in ('.', '..'), f'bad video_id {video_id!r}')
            seen.add(video_id)

            scenes = video.get('scenes')
            _require(isinstance(scenes, list) and scenes, f'{video_id}: "scenes" must be a non-empty list')
            parsed_scenes = []
            for k, scene in enumerate(scenes):
                _require(isinstance(scene, dict), f'{video_id}: scene {k} must be an object')
                texture = scene.get('texture', 'blobs')
                _require(texture in TEXTURES, f'{video_id}: unknown texture {texture!r}')
                frames = _int_field(scene, 'frames', None, 1)
                pan = scene.get('pan', [0, 0])
                _require(
                    isinstance(pan, list) and len(pan) == 2
                    and all(isinstance(p, int) and not isinstance(p, bool) for p in pan),
                    f'{video_id}: pan must be two integers',
                )
                parsed_scenes.append({'texture': texture, 'frames': frames, 'pan': tuple(pan)})

            rules = video.get('evidence', 'cut_frames')
            rules = [rules] if isinstance(rules, str) else rules
            _require(isinstance(rules, list) and rules, f'{video_id}: "evidence" must name at least one rule')
            for rule in rules:
                _require(rule in EVIDENCE_RULES, f'{video_id}: unknown evidence rule {rule!r}')
                _require(rule != 'cut_frames' or len(parsed_scenes) > 1, f'{video_id}: cut_frames needs two or more scenes')
            weights = video.get('weights')
            _require(weights is None or weights in WEIGHT_RULES, f'{video_id}: unknown weights rule {weights!r}')
            stride = _int_field(video, 'candidate_stride', 1, 1)

            parsed.append({
                'video_id': video_id,
                'scenes': parsed_scenes,
                'evidence': rules,
                'weights': weights,
                'candidate_stride': stride,
            })
        return {'width': width, 'height': height, 'videos': parsed}

    @staticmethod
    def scene_bounds(scenes):
        """(start, stop) frame range of every scene."""
        bounds, start = [], 0
        for scene in scenes:
            bounds.append((start, start + scene['frames']))
            start += scene['frames']
        return bounds

    @staticmethod
    def cut_frames(scenes):
        """First frame of every scene after the first."""
        return [start for start, _ in SynthService.scene_bounds(scenes)[1:]]

    @staticmethod
    def render_texture(texture, width, height, rng):
        """Value plane (uint8) of one texture."""
        if texture == 'noise':
            cell = int(rng.integers(3, 7))
            small = rng.integers(40, 256, size=(height // cell + 1, width // cell + 1), dtype=np.uint8)
            plane = np.repeat(np.repeat(small, cell, axis=0), cell, axis=1)
            return np.ascontiguousarray(plane[:height, :width])
        if texture == 'checker':
            cell = int(rng.integers(8, 25))
            lo, hi = int(rng.integers(40, 120)), int(rng.integers(170, 256))
            yy, xx = np.indices((height, width))
            return np.where(((yy // cell) + (xx // cell)) % 2 == 0, lo, hi).astype(np.uint8)
        if texture == 'stripes':
            period = int(rng.integers(6, 20))
            angle = float(rng.uniform(0.0, np.pi))
            yy, xx = np.indices((height, width))
            phase = (xx * np.cos(angle) + yy * np.sin(angle)) * (2 * np.pi / period)
            return (150 + 100 * np.sign(np.sin(phase))).clip(40, 250).astype(np.uint8)

        plane = np.full((height, width), int(rng.integers(40, 90)), dtype=np.uint8)
        count = max(8, width * height // 600)
        for _ in range(count):
            x, y = int(rng.integers(0, width)), int(rng.integers(0, height))
            size = int(rng.integers(4, 16))
            value = int(rng.integers(100, 256))
            if rng.random() < 0.5:
                cv2.rectangle(plane, (x, y), (x + size, y + size), value, thickness=-1)
            else:
                cv2.circle(plane, (x, y), size // 2 + 2, value, thickness=-1)
        return plane

    @staticmethod
    def render_scene(scene, hue, width, height, rng):
        """RGB frames of one scene: a textured canvas panned by an integer step per frame."""
        dx, dy = scene['pan']
        n = scene['frames']
        canvas_w = width + abs(dx) * (n - 1)
        canvas_h = height + abs(dy) * (n - 1)
        value = SynthService.render_texture(scene['texture'], canvas_w, canvas_h, rng)
        hsv = np.dstack([
            np.full_like(value, hue),
            np.full_like(value, SATURATION),
            value,
        ])
        canvas = cv2.cvtColor(hsv, cv2.COLOR_HSV2RGB)

        frames = []
        for f in range(n):
            x0 = dx * f if dx >= 0 else abs(dx) * (n - 1) + dx * f
            y0 = dy * f if dy >= 0 else abs(dy) * (n - 1) + dy * f
            frames.append(np.ascontiguousarray(canvas[y0:y0 + height, x0:x0 + width]))
        return frames

    @staticmethod
    def render_video(video, width, height, seed=0, video_index=0):
        """All RGB frames of a parsed video description."""
        frames = []
        for k, scene in enumerate(video['scenes']):
            rng = np.random.default_rng([seed, video_index, k])
            frames.extend(SynthService.render_scene(scene, scene_hue(k), width, height, rng))
        return frames

    @staticmethod
    def evidence_sets(video, rule):
        bounds = SynthService.scene_bounds(video['scenes'])
        if rule == 'cut_frames':
            return [[start] for start, _ in bounds[1:]]
        if rule == 'scene_midpoint':
            return [[(start + stop) // 2] for start, stop in bounds]
        sets = []
        for start, stop in bounds:
            n = stop - start
            lo, hi = start + n // 4, start + (3 * n) // 4
            sets.append(list(range(lo, max(hi, lo + 1))))
        return sets

    @staticmethod
    def weights_for(video, sets, rule):
        if rule is None:
            return None
        weights = {}
        bounds = SynthService.scene_bounds(video['scenes'])
        for group in sets:
            for t in group:
                if rule == 'uniform':
                    weights[t] = 1.0
                    continue
                start, stop = next((a, b) for a, b in bounds if a <= t < b)
                mid = (start + stop - 1) / 2.0
                weights[t] = 1.0 / (1.0 + abs(t - mid))
        return weights

    @staticmethod
    def annotations(video):
        """Annotation records (one per evidence rule) of a parsed video."""
        total = sum(scene['frames'] for scene in video['scenes'])
        records = []
        for rule in video['evidence']:
            sets = SynthService.evidence_sets(video, rule)
            candidates = set(range(0, total, video['candidate_stride']))
            candidates.update(t for group in sets for t in group)
            record = {
                'instance_id': f"{video['video_id']}-{rule}",
                'video_id': video['video_id'],
                'candidates': sorted(candidates),
                'evidence_sets': sets,
            }
            weights = SynthService.weights_for(video, sets, video['weights'])
            if weights is not None:
                record['weights'] = {str(t): w for t, w in sorted(weights.items())}
            records.append(record)
        return records

    @staticmethod
    def generate(spec, out_dir, seed=0, fmt='png'):
        """
        Write a corpus: one frame directory per video plus annotations.jsonl.

        Args:
            spec: Corpus description (see parse_spec)
            out_dir: Output directory, created if missing
            seed: Seed of every texture draw
            fmt: 'png' (RGB frames) or 'pgry' (one grayscale archive per video)

        Returns:
            Tuple of (list of video directories, annotations path)
        """
        if fmt not in FORMATS:
            raise InvalidSynthSpec(f'format must be one of {FORMATS}')
        parsed = SynthService.parse_spec(spec)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)

        video_dirs, records = [], []
        for vi, video in enumerate(parsed['videos']):
            frames = SynthService.render_video(video, parsed['width'], parsed['height'], seed, vi)
            target = out / video['video_id']
            target.mkdir(exist_ok=True)
            if fmt == 'png':
                for t, rgb in enumerate(frames):
                    Image.fromarray(rgb).save(target / f'frame_{t:05d}.png')
            else:
                planes = [MediaService.rgb_to_gray(rgb) for rgb in frames]
                MediaService.write_pgry(target / f"{video['video_id']}.pgry", planes)
            video_dirs.append(target)
            records.extend(SynthService.annotations(video))
            logger.info('%s: %d frames, cuts at %s', video['video_id'], len(frames), SynthService.cut_frames(video['scenes']))

        annotations = out / 'annotations.jsonl'
        with open(annotations, 'w', encoding='utf-8') as fh:
            for record in records:
                fh.write(json.dumps(record, sort_keys=True) + '\n')
        return video_dirs, annotations
