"""Anomaly-score calculators and score-series transforms.

A :class:`ScoreSeries` holds one score per series index plus a validity
mask; methods that cannot score certain indices (e.g. one-step forecasts
near the edges) mark them invalid and store zero there.  Downstream
transforms (smoothing, masking, fusion, combination) preserve or extend
validity as documented per function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import _kernels as kern
from .errors import AlignmentError, CoverageError
from .model import ModelOutput

__all__ = [
    "ScoreSeries",
    "FusionConfig",
    "SCORE_KINDS",
    "COMBINATIONS",
    "forecast_scores",
    "aggregate_reconstructions",
    "rec_scores_pd",
    "rec_scores_ad",
    "rec_scores_dtw",
    "ewma_smooth",
    "mask_scores",
    "bidirectional_fuse",
    "combine_scores",
    "rescale_scores",
]

SCORE_KINDS = (
    "pred_forward",
    "pred_reverse",
    "rec_pd",
    "rec_ad",
    "rec_dtw",
    "bidirectional",
    "combined",
)

COMBINATIONS = ("pred", "rec", "sum", "mult")

REC_METHODS = ("pd", "ad", "dtw")


@dataclass(frozen=True)
class ScoreSeries:
    """Per-index anomaly scores with a validity mask."""

    scores: np.ndarray
    valid: np.ndarray
    kind: str

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        valid = np.asarray(self.valid, dtype=bool)
        if scores.shape != valid.shape or scores.ndim != 1:
            raise ValueError(
                f"scores {scores.shape} and valid {valid.shape} must be equal 1-D shapes"
            )
        if self.kind not in SCORE_KINDS:
            raise ValueError(f"unknown score kind {self.kind!r}")
        if not np.all(np.isfinite(scores[valid])):
            raise ValueError("scores must be finite wherever valid")
        scores = np.where(valid, scores, 0.0)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "valid", valid)

    def __len__(self) -> int:
        return self.scores.shape[0]

    @property
    def fully_valid(self) -> bool:
        return bool(self.valid.all())

    def valid_scores(self) -> np.ndarray:
        return self.scores[self.valid]


@dataclass(frozen=True)
class FusionConfig:
    """Settings for smoothing, masking, fusion, and score combination.

    ``smoothing_window`` defaults to ceil(0.01 * T) at use time and
    ``mask_length`` defaults to the smoothing window.  ``beta`` defaults to
    0.5 for the convex (sum) combination and 1.0 for the product.
    """

    smoothing_window: int | None = None
    mask_length: int | None = None
    beta: float | None = None
    dtw_half_window: int = 10
    combination: str = "mult"
    reconstruction_method: str = "dtw"

    def __post_init__(self):
        if self.combination not in COMBINATIONS:
            raise ValueError(
                f"combination must be one of {COMBINATIONS}, got {self.combination!r}"
            )
        if self.reconstruction_method not in REC_METHODS:
            raise ValueError(
                f"reconstruction_method must be one of {REC_METHODS}, "
                f"got {self.reconstruction_method!r}"
            )
        if self.dtw_half_window < 1:
            raise ValueError("dtw_half_window must be >= 1")
        if self.smoothing_window is not None and self.smoothing_window < 1:
            raise ValueError("smoothing_window must be >= 1")
        if self.mask_length is not None and self.mask_length < 0:
            raise ValueError("mask_length must be >= 0")
        if self.beta is not None and not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must be in [0, 1], got {self.beta}")

    def resolve_smoothing_window(self, T: int) -> int:
        if self.smoothing_window is not None:
            return self.smoothing_window
        return max(1, math.ceil(0.01 * T))

    def resolve_mask_length(self, T: int) -> int:
        if self.mask_length is not None:
            return self.mask_length
        return self.resolve_smoothing_window(T)

    def resolve_beta(self) -> float:
        if self.beta is not None:
            return self.beta
        return 1.0 if self.combination == "mult" else 0.5


def forecast_scores(truth: np.ndarray, forecasts: np.ndarray, first_index: int,
                    direction: str = "forward") -> ScoreSeries:
    """Absolute error between one-step forecasts and the series.

    ``forecasts[j]`` must predict ``truth[first_index + j]``; positions
    outside that range are invalid (scored zero).
    """
    truth = np.asarray(truth, dtype=np.float64)
    forecasts = np.asarray(forecasts, dtype=np.float64)
    T = truth.shape[0]
    if direction not in ("forward", "reverse"):
        raise ValueError(f"direction must be forward or reverse, got {direction!r}")
    if first_index < 0 or first_index + forecasts.shape[0] > T:
        raise AlignmentError(
            f"forecasts cover [{first_index}, {first_index + forecasts.shape[0]}) "
            f"outside series of length {T}"
        )
    scores = np.zeros(T)
    valid = np.zeros(T, dtype=bool)
    hi = first_index + forecasts.shape[0]
    scores[first_index:hi] = np.abs(truth[first_index:hi] - forecasts)
    valid[first_index:hi] = True
    kind = "pred_forward" if direction == "forward" else "pred_reverse"
    return ScoreSeries(scores=scores, valid=valid, kind=kind)


def aggregate_reconstructions(outputs: Sequence[ModelOutput], T: int) -> np.ndarray:
    """Median-pool the decoder outputs of overlapping windows per index.

    Every decoder emission is used: a window starting at k contributes its
    reverse prediction to index k-1, its reconstruction to [k, k+n-1] and
    its forward prediction to k+n, so every index of a step-1 window sweep
    is covered.  Raises CoverageError for indices no window reaches.
    """
    if not outputs:
        raise CoverageError("no model outputs to aggregate")
    n = outputs[0].reconstruction.shape[0]
    K = len(outputs)
    vals = np.empty((K, n + 2))
    starts = np.empty(K, dtype=np.int64)
    for k, out in enumerate(outputs):
        if out.reconstruction.shape[0] != n:
            raise CoverageError("outputs have inconsistent reconstruction lengths")
        vals[k, 0] = out.reverse_pred
        vals[k, 1 : n + 1] = out.reconstruction
        vals[k, n + 1] = out.forward_pred
        starts[k] = out.start_index

    pool = np.full((T, n + 2), np.nan)
    for p in range(n + 2):
        idx = starts - 1 + p
        ok = (idx >= 0) & (idx < T)
        pool[idx[ok], p] = vals[ok, p]

    counts = np.sum(~np.isnan(pool), axis=1)
    if np.any(counts == 0):
        missing = int(np.flatnonzero(counts == 0)[0])
        raise CoverageError(f"index {missing} is covered by no reconstruction")
    return np.nanmedian(pool, axis=1)


def rec_scores_pd(truth: np.ndarray, recon: np.ndarray) -> ScoreSeries:
    """Point-wise absolute reconstruction error, valid everywhere."""
    truth = np.asarray(truth, dtype=np.float64)
    recon = np.asarray(recon, dtype=np.float64)
    if truth.shape != recon.shape:
        raise AlignmentError(f"truth {truth.shape} vs recon {recon.shape}")
    scores = np.abs(truth - recon)
    return ScoreSeries(scores=scores, valid=np.ones_like(scores, dtype=bool), kind="rec_pd")


def rec_scores_ad(truth: np.ndarray, recon: np.ndarray, l: int = 10) -> ScoreSeries:
    """Trapezoidal area difference over windows [i-l, i+l].

    Edge windows are truncated and the divisor is the actual number of
    trapezoid intervals used.
    """
    truth = np.asarray(truth, dtype=np.float64)
    recon = np.asarray(recon, dtype=np.float64)
    if truth.shape != recon.shape:
        raise AlignmentError(f"truth {truth.shape} vs recon {recon.shape}")
    if l < 1:
        raise ValueError("l must be >= 1")
    T = truth.shape[0]
    diff = truth - recon
    # cumulative trapezoid: ctrap[j] = integral of diff over [0, j]
    ctrap = np.zeros(T)
    if T > 1:
        ctrap[1:] = np.cumsum(0.5 * (diff[1:] + diff[:-1]))
    idx = np.arange(T)
    lo = np.maximum(0, idx - l)
    hi = np.minimum(T - 1, idx + l)
    width = hi - lo
    area = np.abs(ctrap[hi] - ctrap[lo])
    scores = np.where(width > 0, area / np.maximum(width, 1), np.abs(diff))
    return ScoreSeries(scores=scores, valid=np.ones(T, dtype=bool), kind="rec_ad")


def rec_scores_dtw(truth: np.ndarray, recon: np.ndarray, l: int = 10) -> ScoreSeries:
    """Windowed dynamic-time-warping discrepancy.

    For each index the two length-2l windows (truncated at the edges) are
    aligned by the minimum-cost monotone path over squared pointwise costs;
    the score is sqrt(path cost) divided by the path length.
    """
    truth = np.ascontiguousarray(truth, dtype=np.float64)
    recon = np.ascontiguousarray(recon, dtype=np.float64)
    if truth.shape != recon.shape:
        raise AlignmentError(f"truth {truth.shape} vs recon {recon.shape}")
    if l < 1:
        raise ValueError("l must be >= 1")
    scores = kern.dtw_window_scores(truth, recon, int(l))
    return ScoreSeries(scores=scores, valid=np.ones_like(scores, dtype=bool), kind="rec_dtw")


def ewma_smooth(series: ScoreSeries, window: int) -> ScoreSeries:
    """Finite-history exponentially weighted moving average.

    y_t = sum_j (1-a)^j x_{t-j} / sum_j (1-a)^j with a = 2 / (window + 1),
    taken over valid positions only (invalid positions are skipped, not
    zero-filled); the validity mask is preserved.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    a = 2.0 / (window + 1.0)
    q = 1.0 - a
    out = np.zeros(len(series))
    num = 0.0
    den = 0.0
    for j in np.flatnonzero(series.valid):
        num = series.scores[j] + q * num
        den = 1.0 + q * den
        out[j] = num / den
    return ScoreSeries(scores=out, valid=series.valid.copy(), kind=series.kind)


def mask_scores(series: ScoreSeries, m: int, fill: float | None = None) -> ScoreSeries:
    """Replace the first m valid scores.

    By default the replacement value is the series' minimum valid score
    (suppressing start-of-sequence smoothing transients); pass ``fill`` to
    override, e.g. 0.0 for the forward side of bi-directional fusion.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    if m == 0:
        return series
    vid = np.flatnonzero(series.valid)
    if m > vid.shape[0]:
        raise ValueError(f"m={m} exceeds the {vid.shape[0]} valid positions")
    value = float(np.min(series.scores[vid])) if fill is None else float(fill)
    scores = series.scores.copy()
    scores[vid[:m]] = value
    return replace(series, scores=scores)


def bidirectional_fuse(fwd: ScoreSeries, rev: ScoreSeries, n: int, m: int) -> ScoreSeries:
    """Merge forward and reverse prediction scores into one full-range series.

    Piecewise over 0-based indices: reverse-only on [0, n+m), the mean of
    both on [n+m, T-n), forward-only on [T-n, T).  Inside each region an
    index missing its preferred score falls back to whichever direction is
    valid there (degenerate short-series behaviour); indices with neither
    stay invalid.  Masking (zeros on the first m forward scores, minimum on
    the first m reverse scores) is expected to have been applied already.
    """
    T = len(fwd)
    if len(rev) != T:
        raise AlignmentError(f"fwd has length {T}, rev {len(rev)}")
    region_rev = np.zeros(T, dtype=bool)
    region_fwd = np.zeros(T, dtype=bool)
    region_rev[: min(n + m, T)] = True
    region_fwd[max(T - n, 0) :] = True
    region_mid = ~(region_rev | region_fwd)

    both = fwd.valid & rev.valid
    scores = np.zeros(T)
    valid = fwd.valid | rev.valid

    mean = 0.5 * rev.scores + 0.5 * fwd.scores
    # mid region: mean where both, single where one
    scores[region_mid & both] = mean[region_mid & both]
    only_f = region_mid & fwd.valid & ~rev.valid
    only_r = region_mid & rev.valid & ~fwd.valid
    scores[only_f] = fwd.scores[only_f]
    scores[only_r] = rev.scores[only_r]
    # edge regions: preferred direction first, other as fallback
    use_r = region_rev & rev.valid
    fall_f = region_rev & ~rev.valid & fwd.valid
    scores[use_r] = rev.scores[use_r]
    scores[fall_f] = fwd.scores[fall_f]
    use_f = region_fwd & fwd.valid
    fall_r = region_fwd & ~fwd.valid & rev.valid
    scores[use_f] = fwd.scores[use_f]
    scores[fall_r] = rev.scores[fall_r]
    return ScoreSeries(scores=scores, valid=valid, kind="bidirectional")


def rescale_scores(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Min-max rescale onto [lo, hi]; a constant input maps to lo."""
    vmin = float(np.min(values))
    vmax = float(np.max(values))
    if vmax == vmin:
        return np.full_like(values, lo)
    return (values - vmin) / (vmax - vmin) * (hi - lo) + lo


def combine_scores(pred: ScoreSeries, rec: ScoreSeries, config: FusionConfig) -> ScoreSeries:
    """Combine prediction and reconstruction scores per the configured rule.

    pred -> prediction series unchanged; rec -> reconstruction unchanged;
    sum -> rescale both to [0, 1], then (1-beta)*rec + beta*pred;
    mult -> rescale both to [1, 2], then beta * rec * pred.
    For sum/mult the result is valid where both inputs are valid and the
    rescaling statistics come from that common range.
    """
    mode = config.combination
    if mode == "pred":
        return pred
    if mode == "rec":
        return rec
    if len(pred) != len(rec):
        raise AlignmentError(f"pred has length {len(pred)}, rec {len(rec)}")
    beta = config.resolve_beta()
    valid = pred.valid & rec.valid
    scores = np.zeros(len(pred))
    if valid.any():
        if mode == "sum":
            p = rescale_scores(pred.scores[valid], 0.0, 1.0)
            r = rescale_scores(rec.scores[valid], 0.0, 1.0)
            scores[valid] = (1.0 - beta) * r + beta * p
        else:  # mult
            p = rescale_scores(pred.scores[valid], 1.0, 2.0)
            r = rescale_scores(rec.scores[valid], 1.0, 2.0)
            scores[valid] = beta * r * p
    return ScoreSeries(scores=scores, valid=valid, kind="combined")
