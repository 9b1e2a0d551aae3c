"""Frame ingestion: enumeration, decoding, deterministic resizing and grayscale conversion."""
import hashlib
import logging
import os
import re
import struct
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from psfr.errors import (
    CorruptFrame, DimensionMismatch, IndexOutOfRange, MediaError, NoFrames, PreconditionError,
)
from psfr.models.frame import FrameBuffer, FrameRef, ResizeSpec, VideoSource

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = ('.png', '.jpg', '.jpeg')
ARCHIVE_SUFFIX = '.pgry'
PGRY_MAGIC = b'PGRY'
PGRY_VERSION = 1
PGRY_HEADER = struct.Struct('<4sIIII')

Q16 = 16
Q16_ONE = 1 << Q16


def natural_key(name):
    """Sort key treating digit runs as numbers: f2.png < f10.png."""
    return [int(part) if part.isdigit() else part.lower() for part in re.split(r'(\d+)', name)]


def _axis_q16(n_in, n_out):
    """
    Source taps and Q16 weights along one axis for half-pixel-center bilinear mapping.

    src = (i + 0.5) * n_in / n_out - 0.5, clamped to [0, n_in - 1].
    """
    i = np.arange(n_out, dtype=np.int64)
    pos = ((2 * i + 1) * n_in * Q16_ONE) // (2 * n_out) - Q16_ONE // 2
    pos = np.clip(pos, 0, (n_in - 1) * Q16_ONE)
    i0 = pos >> Q16
    frac = pos & (Q16_ONE - 1)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, frac


class MediaService:
    """Frame ingestion operations."""

    @staticmethod
    def open_frame_dir(path, resize=None):
        """
        Enumerate the frames of a directory.

        Args:
            path: Directory holding PNG/JPEG frames or one PGRY archive
            resize: Optional ResizeSpec applied on load

        Returns:
            VideoSource with frames in natural-numeric file name order
        """
        root = Path(path)
        if not root.is_dir():
            raise NoFrames(f'{path} is not a directory')

        names = sorted((p.name for p in root.iterdir() if p.is_file()), key=natural_key)
        images = [n for n in names if n.lower().endswith(IMAGE_SUFFIXES)]
        archives = [n for n in names if n.lower().endswith(ARCHIVE_SUFFIX)]

        if images:
            return MediaService._open_images(root, images, resize)
        if len(archives) == 1:
            return MediaService._open_archive(root / archives[0], root.name, resize)
        if len(archives) > 1:
            raise MediaError(f'{path} holds {len(archives)} PGRY archives; expected one')
        raise NoFrames(f'{path} contains no frames')

    @staticmethod
    def _open_images(root, images, resize):
        sizes = []
        for t, name in enumerate(images):
            try:
                with Image.open(root / name) as img:
                    sizes.append(img.size)
            except (OSError, UnidentifiedImageError, SyntaxError) as exc:
                raise CorruptFrame(t, str(exc)) from exc

        if resize is None and len(set(sizes)) > 1:
            raise DimensionMismatch(f'{root}: frames have differing sizes {sorted(set(sizes))[:3]}')
        width, height = (resize.width, resize.height) if resize else sizes[0]
        refs = tuple(FrameRef(str(root / name)) for name in images)
        logger.debug('opened %s: %d image frames', root.name, len(refs))
        return VideoSource(frame_refs=refs, video_id=root.name, resize=resize, width=width, height=height)

    @staticmethod
    def _open_archive(archive, video_id, resize):
        count, width, height = MediaService.read_pgry_header(archive)
        if count == 0:
            raise NoFrames(f'{archive} holds no frames')
        expected = PGRY_HEADER.size + count * width * height
        if os.path.getsize(archive) < expected:
            raise CorruptFrame(0, f'{archive} is truncated')
        plane = width * height
        refs = tuple(FrameRef(str(archive), PGRY_HEADER.size + t * plane) for t in range(count))
        if resize is not None:
            width, height = resize.width, resize.height
        return VideoSource(frame_refs=refs, video_id=video_id, resize=resize, width=width, height=height)

    @staticmethod
    def read_pgry_header(path):
        """Return (T, width, height) of a PGRY archive."""
        with open(path, 'rb') as fh:
            header = fh.read(PGRY_HEADER.size)
        if len(header) < PGRY_HEADER.size:
            raise CorruptFrame(0, f'{path}: truncated PGRY header')
        magic, version, count, width, height = PGRY_HEADER.unpack(header)
        if magic != PGRY_MAGIC or version != PGRY_VERSION:
            raise CorruptFrame(0, f'{path}: not a PGRY v{PGRY_VERSION} archive')
        return count, width, height

    @staticmethod
    def write_pgry(path, planes):
        """
        Write grayscale planes as a PGRY archive.

        Args:
            path: Output file
            planes: Sequence of equally sized (height, width) uint8 arrays
        """
        planes = [np.ascontiguousarray(p, dtype=np.uint8) for p in planes]
        if not planes:
            raise NoFrames('no planes to write')
        height, width = planes[0].shape
        if any(p.shape != (height, width) for p in planes):
            raise DimensionMismatch('PGRY planes must share one size')
        with open(path, 'wb') as fh:
            fh.write(PGRY_HEADER.pack(PGRY_MAGIC, PGRY_VERSION, len(planes), width, height))
            for plane in planes:
                fh.write(plane.tobytes())

    @staticmethod
    def load_frame(src, t):
        """
        Decode frame t of a video source.

        Returns:
            FrameBuffer resized per src.resize, with its grayscale plane populated
        """
        if not 0 <= t < src.count:
            raise IndexOutOfRange(f'frame {t} outside 0..{src.count - 1}')
        ref = src.frame_refs[t]
        if ref.offset is not None:
            frame = MediaService._load_archive_plane(ref, t)
        else:
            frame = MediaService._load_image(ref.path, t)
        if src.resize is not None:
            frame = MediaService.resize_deterministic(frame, src.resize)
        return frame

    @staticmethod
    def _load_archive_plane(ref, t):
        _, width, height = MediaService.read_pgry_header(ref.path)
        with open(ref.path, 'rb') as fh:
            fh.seek(ref.offset)
            data = fh.read(width * height)
        if len(data) != width * height:
            raise CorruptFrame(t, 'archive plane truncated')
        gray = np.frombuffer(data, dtype=np.uint8).reshape(height, width)
        return FrameBuffer(gray=gray, index=t)

    @staticmethod
    def _load_image(path, t):
        try:
            with Image.open(path) as img:
                img.load()
                if img.mode in ('L', 'I;16', 'I', 'F', '1'):
                    gray = np.asarray(img.convert('L'), dtype=np.uint8)
                    return FrameBuffer(gray=gray, index=t)
                rgb = np.asarray(img.convert('RGB'), dtype=np.uint8)
        except (OSError, UnidentifiedImageError, SyntaxError, ValueError) as exc:
            raise CorruptFrame(t, str(exc)) from exc
        return FrameBuffer(gray=MediaService.rgb_to_gray(rgb), index=t, rgb=rgb)

    @staticmethod
    def rgb_to_gray(rgb):
        """BT.601 luma: round(0.299 r + 0.587 g + 0.114 b), exact in integer arithmetic."""
        rgb = np.asarray(rgb, dtype=np.int32)
        luma = 299 * rgb[..., 0] + 587 * rgb[..., 1] + 114 * rgb[..., 2]
        return ((luma + 500) // 1000).astype(np.uint8)

    @staticmethod
    def resize_plane(plane, width, height):
        """Q16 fixed-point bilinear resize of an (h, w) or (h, w, c) uint8 plane."""
        plane = np.asarray(plane, dtype=np.uint8)
        in_h, in_w = plane.shape[:2]
        if (in_w, in_h) == (width, height):
            return plane.copy()

        x0, x1, fx = _axis_q16(in_w, width)
        y0, y1, fy = _axis_q16(in_h, height)
        src = plane.astype(np.int64)
        if src.ndim == 3:
            fx = fx[None, :, None]
            fy = fy[:, None, None]
        else:
            fx = fx[None, :]
            fy = fy[:, None]

        top = src[y0][:, x0] * (Q16_ONE - fx) + src[y0][:, x1] * fx
        bottom = src[y1][:, x0] * (Q16_ONE - fx) + src[y1][:, x1] * fx
        value = top * (Q16_ONE - fy) + bottom * fy
        # Q32 -> 8 bit, round half up
        return ((value + (1 << (2 * Q16 - 1))) >> (2 * Q16)).astype(np.uint8)

    @staticmethod
    def resize_deterministic(frame, spec):
        """
        Resize a frame to spec.width x spec.height.

        Color frames are resized per channel and their gray plane recomputed from the
        result; gray-only frames are resized directly.
        """
        if not isinstance(spec, ResizeSpec):
            raise PreconditionError('spec must be a ResizeSpec')
        if (frame.width, frame.height) == (spec.width, spec.height):
            return FrameBuffer(gray=frame.gray.copy(), index=frame.index,
                               rgb=None if frame.rgb is None else frame.rgb.copy())
        if frame.rgb is not None:
            rgb = MediaService.resize_plane(frame.rgb, spec.width, spec.height)
            return FrameBuffer(gray=MediaService.rgb_to_gray(rgb), index=frame.index, rgb=rgb)
        gray = MediaService.resize_plane(frame.gray, spec.width, spec.height)
        return FrameBuffer(gray=gray, index=frame.index)

    @staticmethod
    def content_hash(src, extra=b''):
        """SHA-256 over every frame file (or the archive) plus caller-supplied bytes."""
        digest = hashlib.sha256(extra)
        for path in dict.fromkeys(ref.path for ref in src.frame_refs):
            digest.update(os.path.basename(path).encode())
            with open(path, 'rb') as fh:
                for block in iter(lambda: fh.read(1 << 20), b''):
                    digest.update(block)
        return digest.hexdigest()
