"""Tests for MediaService."""
import numpy as np
import pytest

from psfr.errors import CorruptFrame, DimensionMismatch, IndexOutOfRange, MediaError, NoFrames
from psfr.models.frame import FrameBuffer, ResizeSpec
from psfr.services.media_service import MediaService, natural_key
from tests.conftest import save_png


class TestGrayscale:
    """Tests for BT.601 grayscale conversion."""

    def test_pure_red(self):
        """round(0.299 * 255) = 76."""
        rgb = np.zeros((1, 1, 3), np.uint8)
        rgb[..., 0] = 255
        assert MediaService.rgb_to_gray(rgb)[0, 0] == 76

    def test_white_and_black(self):
        rgb = np.full((2, 2, 3), 255, np.uint8)
        assert MediaService.rgb_to_gray(rgb).tolist() == [[255, 255], [255, 255]]
        assert MediaService.rgb_to_gray(np.zeros((1, 1, 3), np.uint8))[0, 0] == 0


class TestResize:
    """Tests for fixed-point bilinear resizing."""

    def test_upsample_row(self):
        """Half-pixel centers: [0, 255] stretched to 4 pixels."""
        plane = np.array([[0, 255]], np.uint8)
        assert MediaService.resize_plane(plane, 4, 1).tolist() == [[0, 64, 191, 255]]

    def test_same_size_is_copy(self):
        plane = np.arange(12, dtype=np.uint8).reshape(3, 4)
        out = MediaService.resize_plane(plane, 4, 3)
        assert np.array_equal(out, plane)
        assert out is not plane

    def test_constant_stays_constant(self):
        """Interpolating a constant plane must not drift."""
        plane = np.full((30, 40), 137, np.uint8)
        assert (MediaService.resize_plane(plane, 17, 11) == 137).all()

    def test_color_frame_recomputes_gray(self):
        """Color frames are resized per channel, gray derived from the result."""
        rgb = np.zeros((8, 8, 3), np.uint8)
        rgb[:, 4:, 1] = 255
        frame = FrameBuffer(gray=MediaService.rgb_to_gray(rgb), rgb=rgb)
        out = MediaService.resize_deterministic(frame, ResizeSpec(4, 4))
        assert out.rgb.shape == (4, 4, 3)
        assert np.array_equal(out.gray, MediaService.rgb_to_gray(out.rgb))

    def test_deterministic(self):
        """Two runs give byte-identical output."""
        plane = np.random.default_rng(0).integers(0, 256, (48, 64), dtype=np.uint8)
        first = MediaService.resize_plane(plane, 37, 29)
        second = MediaService.resize_plane(plane, 37, 29)
        assert first.tobytes() == second.tobytes()


class TestOpenFrameDir:
    """Tests for frame enumeration."""

    def test_natural_order(self, tmp_path):
        """f2 sorts before f10."""
        for name in ('f10.png', 'f2.png', 'f1.png'):
            save_png(tmp_path / name, np.zeros((16, 16), np.uint8))
        src = MediaService.open_frame_dir(tmp_path)
        assert [ref.path.rsplit('/', 1)[-1] for ref in src.frame_refs] == ['f1.png', 'f2.png', 'f10.png']
        assert sorted(['x10', 'x9'], key=natural_key) == ['x9', 'x10']

    def test_empty_directory(self, tmp_path):
        with pytest.raises(NoFrames):
            MediaService.open_frame_dir(tmp_path)

    def test_not_a_directory(self, tmp_path):
        with pytest.raises(NoFrames):
            MediaService.open_frame_dir(tmp_path / 'missing')

    def test_size_mismatch(self, frame_dir):
        """Frames of different sizes without a resize target are rejected."""
        target = frame_dir('mixed', [np.zeros((16, 16), np.uint8), np.zeros((20, 16), np.uint8)])
        with pytest.raises(DimensionMismatch):
            MediaService.open_frame_dir(target)

    def test_size_mismatch_resized(self, frame_dir):
        """A resize target reconciles differing sizes."""
        target = frame_dir('mixed', [np.zeros((16, 16), np.uint8), np.zeros((20, 16), np.uint8)])
        src = MediaService.open_frame_dir(target, ResizeSpec(32, 24))
        assert (src.width, src.height) == (32, 24)
        assert MediaService.load_frame(src, 1).shape == (24, 32)

    def test_corrupt_frame(self, frame_dir):
        """An undecodable file raises CorruptFrame with its index."""
        target = frame_dir('bad', [np.zeros((16, 16), np.uint8)])
        (target / 'frame_00001.png').write_bytes(b'not an image')
        with pytest.raises(CorruptFrame) as exc:
            MediaService.open_frame_dir(target)
        assert exc.value.t == 1

    def test_two_archives(self, tmp_path):
        MediaService.write_pgry(tmp_path / 'a.pgry', [np.zeros((16, 16), np.uint8)])
        MediaService.write_pgry(tmp_path / 'b.pgry', [np.zeros((16, 16), np.uint8)])
        with pytest.raises(MediaError):
            MediaService.open_frame_dir(tmp_path)


class TestLoadFrame:
    """Tests for frame decoding."""

    def test_color_png(self, frame_dir):
        """RGB frames keep their color plane and get a BT.601 gray plane."""
        rgb = np.zeros((16, 16, 3), np.uint8)
        rgb[..., 0] = 255
        src = MediaService.open_frame_dir(frame_dir('red', [rgb]))
        frame = MediaService.load_frame(src, 0)
        assert frame.rgb is not None
        assert (frame.gray == 76).all()

    def test_gray_png(self, frame_dir):
        plane = np.arange(256, dtype=np.uint8).reshape(16, 16)
        frame = MediaService.load_frame(MediaService.open_frame_dir(frame_dir('g', [plane])), 0)
        assert frame.rgb is None
        assert np.array_equal(frame.gray, plane)

    def test_index_out_of_range(self, frame_dir):
        src = MediaService.open_frame_dir(frame_dir('one', [np.zeros((16, 16), np.uint8)]))
        with pytest.raises(IndexOutOfRange):
            MediaService.load_frame(src, 1)
        with pytest.raises(IndexOutOfRange):
            MediaService.load_frame(src, -1)

    def test_pgry_archive(self, tmp_path):
        """Planes written to a PGRY archive load back unchanged."""
        planes = [np.full((16, 24), v, np.uint8) for v in (0, 100, 200)]
        planes[1][3, 5] = 7
        MediaService.write_pgry(tmp_path / 'clip.pgry', planes)
        src = MediaService.open_frame_dir(tmp_path)
        assert src.is_archive
        assert (src.count, src.width, src.height) == (3, 24, 16)
        for t, plane in enumerate(planes):
            assert np.array_equal(MediaService.load_frame(src, t).gray, plane)

    def test_truncated_archive(self, tmp_path):
        MediaService.write_pgry(tmp_path / 'clip.pgry', [np.zeros((16, 16), np.uint8)] * 2)
        data = (tmp_path / 'clip.pgry').read_bytes()
        (tmp_path / 'clip.pgry').write_bytes(data[:-10])
        with pytest.raises(CorruptFrame):
            MediaService.open_frame_dir(tmp_path)


class TestContentHash:
    """Tests for content_hash."""

    def test_depends_on_extra_and_content(self, frame_dir, tmp_path):
        src = MediaService.open_frame_dir(frame_dir('a', [np.zeros((16, 16), np.uint8)]))
        base = MediaService.content_hash(src)
        assert base == MediaService.content_hash(src)
        assert base != MediaService.content_hash(src, b'cfg')
        save_png(tmp_path / 'a' / 'frame_00000.png', np.ones((16, 16), np.uint8))
        assert base != MediaService.content_hash(src)
