"""Image measurements shared by both PSFR stages."""
import cv2
import numpy as np

from psfr.errors import DimensionMismatch, PreconditionError
from psfr.models.vision import HIST_BINS, Corner, ImagePyramid, TrackResult

# cornerMinEigenVal on 8-bit input scales Sobel-3 gradients by 1 / (4 * block * 255)
CORNER_BLOCK = 3
CORNER_APERTURE = 3
CORNER_SCALE = 1.0 / (4 * CORNER_BLOCK * 255.0)

MIN_PYRAMID_SIDE = 8
CANNY_SIGMA = 1.4


class VisionService:
    """Pure image kernels; safe to call concurrently on distinct frames."""

    @staticmethod
    def corner_response(gray):
        """
        Shi-Tomasi response map: lambda_min of the 2x2 structure tensor.

        Sobel 3x3 gradients (scaled by CORNER_SCALE), summed over a 3x3 box window,
        reflect-101 borders. Returns a float32 array shaped like gray.
        """
        gray = np.ascontiguousarray(gray, dtype=np.uint8)
        return cv2.cornerMinEigenVal(gray, blockSize=CORNER_BLOCK, ksize=CORNER_APERTURE)

    @staticmethod
    def shi_tomasi_corners(gray, max_count, quality=0.01, min_dist=8.0, mask=None, response=None):
        """
        Detect Shi-Tomasi corners.

        Args:
            gray: (h, w) uint8 plane, at least 16x16
            max_count: Maximum number of corners returned
            quality: Fraction of the strongest response a corner must exceed
            min_dist: Minimum pairwise distance in pixels
            mask: Optional uint8 mask; detection only where non-zero
            response: Optional precomputed corner_response(gray)

        Returns:
            List of Corner sorted by descending response
        """
        gray = np.ascontiguousarray(gray, dtype=np.uint8)
        if gray.shape[0] < 16 or gray.shape[1] < 16:
            raise PreconditionError(f'plane must be at least 16x16, got {gray.shape[1]}x{gray.shape[0]}')
        if max_count < 1:
            return []
        if response is None:
            response = VisionService.corner_response(gray)
        peak = float(response.max() if mask is None else response[mask > 0].max(initial=0.0))
        if peak <= 0.0:
            return []

        points = cv2.goodFeaturesToTrack(
            gray,
            maxCorners=int(max_count),
            qualityLevel=float(quality),
            minDistance=float(min_dist),
            mask=mask,
            blockSize=CORNER_BLOCK,
            useHarrisDetector=False,
        )
        if points is None:
            return []
        return VisionService._scored_corners(points.reshape(-1, 2), response)

    @staticmethod
    def _scored_corners(points, response):
        xs = points[:, 0].astype(np.int64)
        ys = points[:, 1].astype(np.int64)
        scores = response[ys, xs].astype(np.float64)
        # Descending response; ties go to the smaller (y, x)
        order = np.lexsort((xs, ys, -scores))
        return [Corner(float(points[i, 0]), float(points[i, 1]), float(scores[i])) for i in order]

    @staticmethod
    def build_pyramid(gray, levels=3):
        """
        Gaussian pyramid with floor halving.

        Levels stop early rather than drop below 8x8. calcOpticalFlowPyrLK builds its own
        levels from the base, so only the depth is fixed here.
        """
        base = np.ascontiguousarray(gray, dtype=np.uint8)
        h, w = base.shape
        depth = 1
        while depth < levels and h // 2 >= MIN_PYRAMID_SIDE and w // 2 >= MIN_PYRAMID_SIDE:
            h, w = h // 2, w // 2
            depth += 1
        return ImagePyramid(base=base, depth=depth)

    @staticmethod
    def lk_track(prev, next, points, win=21, levels=3, max_iters=30, eps=0.03, fb_thresh=1.0):
        """
        Pyramidal Lucas-Kanade tracking with a forward-backward reliability check.

        A point is accepted when both passes converge, the forward-backward distance is
        at most fb_thresh, and the tracked position keeps a win/2 margin to the border.

        Args:
            prev: ImagePyramid of frame t
            next: ImagePyramid of frame t+1
            points: Corners (or an (N, 2) array) in frame t
        """
        if prev.shape != next.shape:
            raise DimensionMismatch(f'pyramid shapes differ: {prev.shape} vs {next.shape}')
        p0 = np.asarray([(p[0], p[1]) for p in points], dtype=np.float32).reshape(-1, 2)
        n = len(p0)
        if n == 0:
            return TrackResult(np.zeros((0, 2), np.float32), np.zeros(0, bool), np.zeros(0, np.float32))

        max_level = max(0, min(levels, len(prev), len(next)) - 1)
        lk_params = dict(
            winSize=(int(win), int(win)),
            maxLevel=max_level,
            criteria=(cv2.TERM_CRITERIA_COUNT | cv2.TERM_CRITERIA_EPS, int(max_iters), float(eps)),
        )
        p0 = p0.reshape(-1, 1, 2)
        p1, st1, _ = cv2.calcOpticalFlowPyrLK(prev.base, next.base, p0, None, **lk_params)
        p0r, st2, _ = cv2.calcOpticalFlowPyrLK(next.base, prev.base, p1, None, **lk_params)

        p1 = p1.reshape(-1, 2)
        fb_error = np.linalg.norm(p0.reshape(-1, 2) - p0r.reshape(-1, 2), axis=1).astype(np.float32)

        height, width = prev.shape
        margin = win // 2
        inside = (
            (p1[:, 0] >= margin) & (p1[:, 0] < width - margin)
            & (p1[:, 1] >= margin) & (p1[:, 1] < height - margin)
        )
        status = (st1.ravel() == 1) & (st2.ravel() == 1) & np.isfinite(fb_error) & (fb_error <= fb_thresh) & inside
        return TrackResult(points_out=p1.astype(np.float32), status=status, fb_error=fb_error)

    @staticmethod
    def canny_edge_density(gray, lo=50.0, hi=150.0):
        """Fraction of Canny edge pixels after a sigma 1.4 Gaussian blur."""
        if lo >= hi:
            raise PreconditionError(f'Canny thresholds need lo < hi, got {lo} >= {hi}')
        gray = np.ascontiguousarray(gray, dtype=np.uint8)
        blurred = cv2.GaussianBlur(gray, (5, 5), CANNY_SIGMA)
        edges = cv2.Canny(blurred, float(lo), float(hi), apertureSize=3, L2gradient=True)
        return float(np.count_nonzero(edges)) / edges.size

    @staticmethod
    def grayscale_entropy(gray):
        """Shannon entropy of the 256-bin intensity histogram, in bits divided by 8."""
        values = np.asarray(gray, dtype=np.uint8).ravel()
        if values.size == 0:
            raise PreconditionError('entropy of an empty plane')
        counts = np.bincount(values, minlength=256)
        p = counts[counts > 0] / values.size
        return float(-np.sum(p * np.log2(p)) / 8.0) + 0.0

    @staticmethod
    def hsv_histogram(frame):
        """
        12x6x6 HSV histogram over all pixels, L2-normalized, flattened hue-major.

        Gray-only frames are replicated into three channels first.
        """
        rgb = frame.rgb
        if rgb is None:
            rgb = np.repeat(frame.gray[:, :, None], 3, axis=2)
        hsv = cv2.cvtColor(np.ascontiguousarray(rgb), cv2.COLOR_RGB2HSV)
        hist = cv2.calcHist([hsv], [0, 1, 2], None, list(HIST_BINS), [0, 180, 0, 256, 0, 256])
        bins = hist.astype(np.float64).ravel()
        return bins / np.linalg.norm(bins)

    @staticmethod
    def cosine(a, b):
        """Cosine similarity; zero vectors are dissimilar to everything."""
        na = np.linalg.norm(a)
        nb = np.linalg.norm(b)
        if na == 0.0 or nb == 0.0:
            return 0.0
        return float(np.dot(a, b) / (na * nb))
