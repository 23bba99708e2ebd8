import math

import numpy as np
import pytest

from aer._kernels import _reference as kref
from aer.errors import AlignmentError, CoverageError
from aer.model import ModelOutput
from aer.scoring import (
    FusionConfig,
    ScoreSeries,
    aggregate_reconstructions,
    bidirectional_fuse,
    combine_scores,
    ewma_smooth,
    forecast_scores,
    mask_scores,
    rec_scores_ad,
    rec_scores_dtw,
    rec_scores_pd,
    rescale_scores,
)


def series(scores, valid=None, kind="combined"):
    scores = np.asarray(scores, dtype=np.float64)
    if valid is None:
        valid = np.ones_like(scores, dtype=bool)
    return ScoreSeries(scores=scores, valid=np.asarray(valid, dtype=bool), kind=kind)


class TestScoreSeries:
    def test_invalid_positions_hold_zero(self):
        s = series([3.0, 4.0, 5.0], valid=[True, False, True])
        assert s.scores[1] == 0.0

    def test_nonfinite_valid_rejected(self):
        with pytest.raises(ValueError):
            series([1.0, np.inf], valid=[True, True])

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            series([1.0], kind="nope")


class TestForecastScores:
    def test_perfect_forecasts_zero(self, rng):
        truth = rng.normal(size=10)
        out = forecast_scores(truth, truth[3:].copy(), 3, "forward")
        assert np.array_equal(out.scores[3:], np.zeros(7))
        assert out.valid[3:].all() and not out.valid[:3].any()
        assert out.kind == "pred_forward"

    def test_forward_example_t5_n2(self):
        truth = np.array([9.0, 9.0, 1.0, 2.0, 1.0])
        out = forecast_scores(truth, np.array([1.5, 2.0, 0.0]), 2, "forward")
        assert np.allclose(out.scores[2:], [0.5, 0.0, 1.0])
        assert list(out.valid) == [False, False, True, True, True]

    def test_reverse_valid_range(self, rng):
        truth = rng.normal(size=5)
        out = forecast_scores(truth, rng.normal(size=3), 0, "reverse")
        assert list(out.valid) == [True, True, True, False, False]
        assert out.kind == "pred_reverse"

    def test_misaligned_raises(self, rng):
        with pytest.raises(AlignmentError):
            forecast_scores(rng.normal(size=5), rng.normal(size=4), 2, "forward")


def output(start, rev, rec, fwd):
    return ModelOutput(reverse_pred=float(rev), reconstruction=np.asarray(rec, dtype=float),
                       forward_pred=float(fwd), start_index=start)


class TestAggregateReconstructions:
    def test_agreeing_windows(self):
        outs = [output(k, 5.0, [5.0, 5.0, 5.0], 5.0) for k in range(3)]
        agg = aggregate_reconstructions(outs, 6)
        assert np.array_equal(agg, np.full(6, 5.0))

    def test_median_robust_to_outlier(self):
        # index 2 pools {1, 2, 9} from the three windows' reconstructions
        outs = [
            output(0, 0.0, [0.0, 0.0, 1.0], 0.0),
            output(1, 0.0, [0.0, 2.0, 0.0], 0.0),
            output(2, 0.0, [9.0, 0.0, 0.0], 0.0),
        ]
        agg = aggregate_reconstructions(outs, 6)
        assert agg[2] == 2.0

    def test_even_count_median_is_midpoint(self):
        outs = [
            output(0, 0.0, [0.0, 1.0], 0.0),
            output(1, 0.0, [3.0, 0.0], 7.0),
        ]
        # index 1 pools {1, 3}
        agg = aggregate_reconstructions(outs, 4)
        assert agg[1] == 2.0

    def test_full_coverage_from_step1_sweep(self, rng):
        T, n = 12, 4
        outs = [output(k, rng.normal(), rng.normal(size=n), rng.normal())
                for k in range(T - n)]
        agg = aggregate_reconstructions(outs, T)
        assert agg.shape == (T,) and np.all(np.isfinite(agg))

    def test_uncovered_index_raises(self):
        outs = [output(0, 0.0, [1.0, 1.0], 0.0)]
        with pytest.raises(CoverageError):
            aggregate_reconstructions(outs, 10)


class TestRecScoresPd:
    def test_perfect(self, rng):
        t = rng.normal(size=8)
        out = rec_scores_pd(t, t.copy())
        assert np.array_equal(out.scores, np.zeros(8))
        assert out.fully_valid

    def test_simple_pair(self):
        out = rec_scores_pd(np.array([1.0, 2.0]), np.array([1.0, 3.0]))
        assert np.array_equal(out.scores, [0.0, 1.0])

    def test_elementwise_oracle(self, rng):
        t = rng.normal(size=40)
        y = rng.normal(size=40)
        expected = np.array([abs(a - b) for a, b in zip(t, y)])
        assert np.array_equal(rec_scores_pd(t, y).scores, expected)


class TestRecScoresAd:
    def test_identical_zero(self, rng):
        t = rng.normal(size=30)
        assert np.array_equal(rec_scores_ad(t, t.copy(), 3).scores, np.zeros(30))

    def test_constant_difference(self, rng):
        t = rng.normal(size=40)
        out = rec_scores_ad(t, t - 0.7, 5)
        assert np.allclose(out.scores, 0.7, atol=1e-12)

    def test_hand_trapezoid(self):
        t = np.zeros(5)
        y = np.array([0.0, 1.0, 1.0, 1.0, 0.0])
        out = rec_scores_ad(t, y, 2)
        assert out.scores[2] == pytest.approx(0.75)

    def test_per_index_trapezoid_oracle(self, rng):
        t = rng.normal(size=25)
        y = rng.normal(size=25)
        l = 4
        out = rec_scores_ad(t, y, l)
        for i in range(25):
            lo, hi = max(0, i - l), min(24, i + l)
            if hi == lo:
                continue
            expected = abs(np.trapezoid(t[lo : hi + 1]) - np.trapezoid(y[lo : hi + 1]))
            expected /= hi - lo
            assert out.scores[i] == pytest.approx(expected, rel=1e-12)


def enumerate_dtw(a, b):
    """Exhaustive monotone warp-path search mirroring the DP accumulation."""
    m = len(a)
    best = [math.inf, 0]

    def walk(p, q, total, steps):
        total = total + (a[p] - b[q]) ** 2
        steps += 1
        if p == m - 1 and q == m - 1:
            if total < best[0]:
                best[0] = total
                best[1] = steps
            return
        if p + 1 < m and q + 1 < m:
            walk(p + 1, q + 1, total, steps)
        if p + 1 < m:
            walk(p + 1, q, total, steps)
        if q + 1 < m:
            walk(p, q + 1, total, steps)

    walk(0, 0, 0.0, 0)
    return math.sqrt(best[0]) / best[1]


class TestRecScoresDtw:
    def test_identical_zero(self, rng):
        t = rng.normal(size=20)
        assert np.array_equal(rec_scores_dtw(t, t.copy(), 4).scores, np.zeros(20))

    def test_offset_pair_example(self):
        # the length-2 window [0,0] vs [1,1]: diagonal path, Q=2, sqrt(2)/2
        t = np.zeros(2)
        y = np.ones(2)
        out = rec_scores_dtw(t, y, 1)
        assert out.scores[1] == pytest.approx(np.sqrt(2.0) / 2.0)

    def test_exhaustive_enumeration_oracle(self, rng):
        for _ in range(40):
            m = int(rng.integers(1, 6))
            a = rng.normal(size=m)
            b = rng.normal(size=m)
            assert kref._dtw_pair(a, b) == enumerate_dtw(a, b)

    def test_symmetry(self, rng):
        t = rng.normal(size=30)
        y = rng.normal(size=30)
        fwd = rec_scores_dtw(t, y, 5).scores
        rev = rec_scores_dtw(y, t, 5).scores
        assert np.array_equal(fwd, rev)

    def test_dominated_by_diagonal_path(self, rng):
        # the diagonal path is one candidate, so DTW can never exceed it
        t = rng.normal(size=30)
        y = rng.normal(size=30)
        l = 5
        dtw = rec_scores_dtw(t, y, l).scores
        for i in range(30):
            lo, hi = max(0, i - l), min(30, i + l)
            m = hi - lo
            diag = math.sqrt(np.sum((t[lo:hi] - y[lo:hi]) ** 2)) / m
            assert dtw[i] <= diag + 1e-12


class TestEwma:
    def test_constant_preserved(self):
        out = ewma_smooth(series(np.full(10, 3.25)), 4)
        assert np.allclose(out.scores, 3.25, atol=1e-12)

    def test_window_one_identity(self, rng):
        s = series(rng.random(size=12))
        out = ewma_smooth(s, 1)
        assert np.array_equal(out.scores, s.scores)

    def test_hand_example(self):
        out = ewma_smooth(series([0.0, 1.0, 1.0]), 3)
        assert np.allclose(out.scores, [0.0, 2.0 / 3.0, 6.0 / 7.0], atol=1e-12)

    def test_direct_weighted_sum_oracle(self, rng):
        x = rng.random(size=200)
        W = 9
        a = 2.0 / (W + 1.0)
        out = ewma_smooth(series(x), W)
        for t in (0, 3, 57, 199):
            w = (1 - a) ** np.arange(t + 1)
            expected = np.sum(w * x[t::-1]) / np.sum(w)
            assert out.scores[t] == pytest.approx(expected, abs=1e-12)

    def test_invalid_positions_skipped(self, rng):
        x = np.array([1.0, 2.0, 99.0, 4.0])
        valid = np.array([True, True, False, True])
        out = ewma_smooth(series(x, valid), 3)
        compact = ewma_smooth(series(np.array([1.0, 2.0, 4.0])), 3)
        assert np.allclose(out.scores[[0, 1, 3]], compact.scores)
        assert out.scores[2] == 0.0
        assert np.array_equal(out.valid, valid)

    def test_prefix_convexity_bound(self, rng):
        x = rng.random(size=100)
        out = ewma_smooth(series(x), 7)
        running_min = np.minimum.accumulate(x)
        running_max = np.maximum.accumulate(x)
        assert np.all(out.scores >= running_min - 1e-12)
        assert np.all(out.scores <= running_max + 1e-12)


class TestMaskScores:
    def test_zero_is_identity(self):
        s = series([5.0, 4.0])
        assert mask_scores(s, 0) is s

    def test_min_substitution(self):
        out = mask_scores(series([5.0, 4.0, 1.0, 2.0]), 2)
        assert np.array_equal(out.scores, [1.0, 1.0, 1.0, 2.0])

    def test_constant_unchanged(self):
        s = series([2.0, 2.0, 2.0])
        out = mask_scores(s, 2)
        assert np.array_equal(out.scores, s.scores)

    def test_min_preserved_and_bounded_changes(self, rng):
        x = rng.random(size=30) + 0.5
        s = series(x)
        out = mask_scores(s, 7)
        assert out.scores.min() == s.scores.min()
        assert np.count_nonzero(out.scores != s.scores) <= 7

    def test_masks_first_valid_only(self):
        s = series([9.0, 5.0, 3.0], valid=[False, True, True])
        out = mask_scores(s, 1)
        assert np.array_equal(out.scores, [0.0, 3.0, 3.0])

    def test_zero_fill_variant(self):
        out = mask_scores(series([5.0, 4.0, 3.0]), 2, fill=0.0)
        assert np.array_equal(out.scores, [0.0, 0.0, 3.0])

    def test_m_exceeding_valid_count(self):
        with pytest.raises(ValueError):
            mask_scores(series([1.0, 2.0]), 3)


class TestBidirectionalFuse:
    def test_piecewise_example(self):
        # T=8, n=2, m=0: rev on the first two, mean in the overlap, fwd on the tail
        T, n = 8, 2
        rev = series([1.0] * 6 + [0.0, 0.0], valid=[True] * 6 + [False] * 2,
                     kind="pred_reverse")
        fwd = series([0.0, 0.0] + [3.0] * 6, valid=[False] * 2 + [True] * 6,
                     kind="pred_forward")
        fused = bidirectional_fuse(fwd, rev, n, 0)
        assert np.array_equal(fused.scores, [1, 1, 2, 2, 2, 2, 3, 3])
        assert fused.fully_valid
        assert fused.kind == "bidirectional"

    def test_equal_inputs_mean_in_overlap(self, rng):
        T, n = 20, 4
        x = rng.random(size=T)
        rev = series(np.where(np.arange(T) < T - n, x, 0.0),
                     valid=np.arange(T) < T - n, kind="pred_reverse")
        fwd = series(np.where(np.arange(T) >= n, x, 0.0),
                     valid=np.arange(T) >= n, kind="pred_forward")
        fused = bidirectional_fuse(fwd, rev, n, 0)
        mid = slice(n, T - n)
        assert np.allclose(fused.scores[mid], x[mid])

    def test_region_exactness(self, rng):
        T, n, m = 30, 5, 3
        rev_scores = rng.random(size=T)
        fwd_scores = rng.random(size=T)
        rev = series(np.where(np.arange(T) < T - n, rev_scores, 0.0),
                     valid=np.arange(T) < T - n, kind="pred_reverse")
        fwd = series(np.where(np.arange(T) >= n, fwd_scores, 0.0),
                     valid=np.arange(T) >= n, kind="pred_forward")
        fused = bidirectional_fuse(fwd, rev, n, m)
        assert np.array_equal(fused.scores[: n + m], rev.scores[: n + m])
        assert np.array_equal(fused.scores[T - n :], fwd.scores[T - n :])
        both = slice(n + m, T - n)
        assert np.allclose(fused.scores[both],
                           0.5 * rev.scores[both] + 0.5 * fwd.scores[both])
        assert fused.fully_valid

    def test_first_n_indices_are_valid(self, rng):
        # forward-only scoring misses the first n indices; fusion fills them
        T, n = 25, 6
        rev = series(rng.random(size=T), valid=np.arange(T) < T - n, kind="pred_reverse")
        fwd = series(rng.random(size=T), valid=np.arange(T) >= n, kind="pred_forward")
        fused = bidirectional_fuse(fwd, rev, n, 0)
        assert fused.valid[:n].all()

    def test_degenerate_short_series_falls_back(self):
        # T <= 2n: regions overlap; every index still gets whichever side exists
        T, n = 6, 4
        rev = series([1, 1, 0, 0, 0, 0], valid=[True, True, False, False, False, False],
                     kind="pred_reverse")
        fwd = series([0, 0, 0, 0, 3, 3], valid=[False, False, False, False, True, True],
                     kind="pred_forward")
        fused = bidirectional_fuse(fwd, rev, n, 0)
        assert np.array_equal(fused.scores, [1, 1, 0, 0, 3, 3])
        assert list(fused.valid) == [True, True, False, False, True, True]


class TestCombineScores:
    def test_pred_is_bit_identical_input(self, rng):
        pred = series(rng.random(size=9), kind="bidirectional")
        rec = series(rng.random(size=9), kind="rec_dtw")
        out = combine_scores(pred, rec, FusionConfig(combination="pred"))
        assert out is pred

    def test_rec_passthrough(self, rng):
        pred = series(rng.random(size=9), kind="bidirectional")
        rec = series(rng.random(size=9), kind="rec_dtw")
        assert combine_scores(pred, rec, FusionConfig(combination="rec")) is rec

    def test_sum_equal_inputs(self, rng):
        x = rng.random(size=12)
        pred = series(x, kind="bidirectional")
        rec = series(x.copy(), kind="rec_dtw")
        out = combine_scores(pred, rec, FusionConfig(combination="sum"))
        assert np.allclose(out.scores, rescale_scores(x, 0.0, 1.0))

    def test_mult_example(self):
        pred = series([1.0, 2.0], kind="bidirectional")
        rec = series([2.0, 1.0], kind="rec_dtw")
        out = combine_scores(pred, rec, FusionConfig(combination="mult"))
        assert np.array_equal(out.scores, [2.0, 2.0])

    def test_constant_series_maps_to_lower_bound(self, rng):
        pred = series(rng.random(size=6), kind="bidirectional")
        rec = series(np.full(6, 4.0), kind="rec_dtw")
        out_sum = combine_scores(pred, rec, FusionConfig(combination="sum"))
        assert np.allclose(out_sum.scores, 0.5 * rescale_scores(pred.scores, 0.0, 1.0))
        out_mult = combine_scores(pred, rec, FusionConfig(combination="mult"))
        assert np.allclose(out_mult.scores, rescale_scores(pred.scores, 1.0, 2.0))

    def test_argmax_invariant_under_common_affine(self, rng):
        p = rng.random(size=50)
        r = rng.random(size=50)
        for mode in ("sum", "mult"):
            cfg = FusionConfig(combination=mode)
            base = combine_scores(series(p, kind="bidirectional"),
                                  series(r, kind="rec_dtw"), cfg)
            shifted = combine_scores(series(3.0 * p + 7.0, kind="bidirectional"),
                                     series(3.0 * r + 7.0, kind="rec_dtw"), cfg)
            assert np.argmax(base.scores) == np.argmax(shifted.scores)
            assert np.allclose(base.scores, shifted.scores, atol=1e-12)

    def test_beta_defaults(self):
        assert FusionConfig(combination="sum").resolve_beta() == 0.5
        assert FusionConfig(combination="mult").resolve_beta() == 1.0
        assert FusionConfig(combination="sum", beta=0.2).resolve_beta() == 0.2

    def test_smoothing_and_mask_defaults(self):
        cfg = FusionConfig()
        assert cfg.resolve_smoothing_window(2000) == 20
        assert cfg.resolve_mask_length(2000) == 20
        assert FusionConfig(smoothing_window=7).resolve_mask_length(500) == 7
        assert FusionConfig(mask_length=3).resolve_mask_length(500) == 3
