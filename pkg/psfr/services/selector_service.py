"""Stage 2: keyframe selection from cached signals."""
import logging
import time

import numpy as np

from psfr.errors import EmptyCandidates, PreconditionError
from psfr.models.selection import SelectionResult, SelectionStatus, SelectorParams
from psfr.services.signal_service import SignalService

logger = logging.getLogger(__name__)

SELECTORS = ('uniform', 'psfr')


def uniform_ranks(n, K):
    """
    K evenly spaced ranks into a sorted list of n items, endpoints included.

    r_i = round(i * (n - 1) / (K - 1)) with halves rounded up, in exact integer arithmetic.
    """
    if n <= K:
        return list(range(n))
    if K == 1:
        return [0]
    return [(2 * i * (n - 1) + (K - 1)) // (2 * (K - 1)) for i in range(K)]


def _unit_rows(H):
    H = np.asarray(H, dtype=np.float64)
    norms = np.linalg.norm(H, axis=1, keepdims=True)
    return np.divide(H, norms, out=np.zeros_like(H), where=norms > 0)


class SelectorService:
    """Keyframe selectors and the output guard."""

    @staticmethod
    def uniform_select(req):
        """
        Evenly spaced ranks over the sorted candidate list.

        Returns A unchanged when |A| <= K.
        """
        start = time.thread_time()
        if not req.A:
            raise EmptyCandidates('candidate set is empty')
        indices = tuple(req.A[r] for r in uniform_ranks(len(req.A), req.K))
        return SelectionResult(indices=indices, elapsed=time.thread_time() - start)

    @staticmethod
    def quality_score(row, params, motion=0.0):
        """q_t = w . s_t, plus w_motion * normalized motion when use_motion is set."""
        row = np.asarray(row, dtype=np.float64)
        if row.shape[-1] != len(params.w):
            raise PreconditionError(f'signal rows have {len(params.w)} columns, got {row.shape[-1]}')
        q = row @ np.asarray(params.w, dtype=np.float64)
        if params.use_motion:
            q = q + params.w_motion * np.asarray(motion, dtype=np.float64)
        return q

    @staticmethod
    def change_signal(H):
        """d_0 = 0, d_t = 1 - cos(h_{t-1}, h_t); zero histograms count as fully changed."""
        unit = _unit_rows(H)
        if len(unit) < 1:
            raise PreconditionError('change signal needs at least one frame')
        d = np.zeros(len(unit))
        if len(unit) > 1:
            d[1:] = 1.0 - np.einsum('ij,ij->i', unit[:-1], unit[1:])
        return np.clip(d, 0.0, 2.0)

    @staticmethod
    def nearest_peak(d, start, lo, hi):
        """
        Local maximum of d in [lo, hi] closest to start, or start when there is none.

        A local maximum rises strictly from its left neighbour and is not below its right
        one. Equal distances go to the stronger peak, then to the earlier one.
        """
        best = None
        for i in range(lo, hi + 1):
            right = d[i + 1] if i + 1 < len(d) else -np.inf
            if d[i] <= 0.0 or d[i] <= d[i - 1] or d[i] < right:
                continue
            key = (abs(i - start), -d[i], i)
            if best is None or key < best[0]:
                best = (key, i)
        return start if best is None else best[1]

    @staticmethod
    def slot_starts(d, K, params):
        """
        First rank of each of the K slots over n > K candidates.

        Starts are strictly increasing so no slot is empty.
        """
        n = len(d)
        starts = np.asarray(uniform_ranks(n, K), dtype=np.int64)
        if params.slot_mode == 'cumulative-change':
            D = np.cumsum(d)
            total = D[-1]
            if total > 0:
                levels = total * np.arange(K) / K
                starts = np.searchsorted(D, levels, side='left').astype(np.int64)
                starts[0] = 0

        if params.peak_align and params.nms_gap > 0:
            g = params.nms_gap
            for k in range(1, K):
                start = int(min(starts[k], n - 1))
                starts[k] = SelectorService.nearest_peak(d, start, max(1, start - g), min(n - 1, start + g))

        for k in range(1, K):
            starts[k] = max(starts[k], starts[k - 1] + 1)
        upper = n
        for k in range(K - 1, 0, -1):
            starts[k] = min(starts[k], upper - 1)
            upper = starts[k]
        return starts

    @staticmethod
    def slot_centrality(size):
        """Tent over a slot of size ranks: 1 in the middle, 0 at both ends."""
        if size == 1:
            return np.ones(1)
        i = np.arange(size, dtype=np.float64)
        return 1.0 - np.abs(2.0 * i - (size - 1)) / (size - 1)

    @staticmethod
    def psfr_select(req, params=None):
        """
        Slot-wise greedy selection with a diversity penalty and index-gap suppression.

        Each slot scores its frames by quality, histogram change, centrality and
        dissimilarity to earlier picks. The change that opens a slot is not scored, and
        frames within nms_gap of an earlier pick are skipped, so a slot only comes back
        empty when every frame in it is too close to an earlier pick.

        Args:
            req: SelectionRequest
            params: SelectorParams (defaults when omitted)

        Returns:
            SelectionResult with ascending indices, a subset of A, at most K
        """
        start = time.thread_time()
        params = params or SelectorParams()
        if not req.A:
            raise EmptyCandidates('candidate set is empty')
        if len(req.A) <= req.K:
            return SelectionResult(indices=tuple(req.A), elapsed=time.thread_time() - start)

        A = np.asarray(req.A, dtype=np.int64)
        n, K = len(A), req.K
        motion = 0.0
        if params.use_motion:
            if req.raw is None:
                raise PreconditionError('use_motion needs the raw cue block')
            motion = SignalService.normalized_motion(req.raw)[A]
        q = SelectorService.quality_score(np.asarray(req.S, dtype=np.float64)[A], params, motion)
        unit = _unit_rows(np.asarray(req.H)[A])
        d = SelectorService.change_signal(unit)

        bounds = list(SelectorService.slot_starts(d, K, params)) + [n]
        picks = []
        for k in range(K):
            lo, hi = bounds[k], bounds[k + 1]
            change = d[lo:hi].copy()
            change[0] = 0.0
            score = q[lo:hi] + params.w_change * change
            if params.w_center:
                score = score + params.w_center * SelectorService.slot_centrality(hi - lo)
            if picks and params.lambda_div > 0:
                similarity = unit[lo:hi] @ unit[picks].T
                score = score - params.lambda_div * similarity.max(axis=1)
            if picks:
                gaps = np.abs(A[lo:hi, None] - A[picks][None, :])
                blocked = (gaps <= params.nms_gap).any(axis=1)
                if blocked.all():
                    continue
                score = np.where(blocked, -np.inf, score)
            picks.append(lo + int(np.argmax(score)))

        indices = tuple(int(A[p]) for p in picks)
        return SelectionResult(indices=indices, elapsed=time.thread_time() - start)

    @staticmethod
    def check_indices(result, candidates, K, t_max=None):
        """Guard a selection against a candidate set, budget and optional time limit."""
        if result is None:
            return SelectionStatus.FAILED
        indices = [int(i) for i in result.indices]
        if len(set(indices)) != len(indices):
            return SelectionStatus.DUPLICATE_INDICES
        if not set(indices) <= set(candidates):
            return SelectionStatus.OUT_OF_CANDIDATES
        if len(indices) > K:
            return SelectionStatus.BUDGET_EXCEEDED
        if t_max is not None and result.elapsed > t_max:
            return SelectionStatus.TIME_EXCEEDED
        return SelectionStatus.OK

    @staticmethod
    def validate_selection(result, req, t_max=None):
        """Violation as a value; SelectionStatus.OK when the output is admissible."""
        return SelectorService.check_indices(result, req.A, req.K, t_max)

    @staticmethod
    def run_selector(req, selector='psfr', params=None, timing_mode='wallclock'):
        """
        Run a selector without letting it raise.

        Returns:
            Tuple of (SelectionResult or None on failure, SelectionStatus before the time check)
        """
        if selector not in SELECTORS:
            raise PreconditionError(f'unknown selector {selector!r}')
        try:
            if selector == 'uniform':
                result = SelectorService.uniform_select(req)
            else:
                result = SelectorService.psfr_select(req, params)
        except Exception as exc:
            logger.warning('selector failed: %s', exc)
            return None, SelectionStatus.FAILED
        if timing_mode == 'zero':
            result = SelectionResult(indices=result.indices, elapsed=0.0)
        return result, SelectorService.validate_selection(result, req)
