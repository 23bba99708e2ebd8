"""End-to-end composition: preprocess, train, score, detect.

The preprocessing parameters (trend line, scaling, imputation means) are
fitted on the training prefix of the signal — the full signal by default,
or the leading 1 - split_fraction share when a suffix is reserved for
scoring only — and then applied to the whole series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .detector import AnomalyReport, DetectorConfig, detect
from .errors import AlignmentError, UnimputableChannelError
from .evaluate import EvalCounts, contextual_f1
from .model import AerConfig, AerModel, predict_all, train
from .scoring import (
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
)
from .signal import ScaleParams, Signal, TrendParams, make_windows

__all__ = [
    "PipelineConfig",
    "PreprocessParams",
    "FittedPipeline",
    "ScoreBundle",
    "fit_preprocessing",
    "apply_preprocessing",
    "fit_pipeline",
    "score_signal",
    "detect_signal",
    "evaluate_report",
]


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob of the pipeline in one place."""

    detrend: bool = True
    scale_lo: float = -1.0
    scale_hi: float = 1.0
    split_fraction: float = 0.0
    masking: bool = True
    bidirectional: bool = True
    target_channel: int = 0
    model: AerConfig = field(default_factory=AerConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)

    def __post_init__(self):
        if not 0.0 <= self.split_fraction < 1.0:
            raise ValueError("split_fraction must be in [0, 1)")
        if not self.scale_lo < self.scale_hi:
            raise ValueError("need scale_lo < scale_hi")


@dataclass(frozen=True)
class PreprocessParams:
    """Transform parameters learned from the training prefix."""

    trend: TrendParams | None
    scale: ScaleParams
    impute_means: np.ndarray
    train_length: int


@dataclass
class FittedPipeline:
    config: PipelineConfig
    preprocessing: PreprocessParams
    model: AerModel
    loss_history: list


@dataclass
class ScoreBundle:
    """All intermediate and final score series of one signal."""

    forward: ScoreSeries
    reverse: ScoreSeries
    reconstruction_scores: ScoreSeries
    prediction: ScoreSeries
    combined: ScoreSeries
    reconstruction: np.ndarray

    def series(self) -> list:
        return [
            self.forward,
            self.reverse,
            self.reconstruction_scores,
            self.prediction,
            self.combined,
        ]


def _train_length(T: int, split_fraction: float) -> int:
    reserved = int(math.floor(T * split_fraction))
    return max(T - reserved, 1)


def fit_preprocessing(signal: Signal, config: PipelineConfig) -> PreprocessParams:
    """Fit the detrend line, min-max scaling, and imputation means."""
    t_train = _train_length(signal.length, config.split_fraction)
    vals = signal.values[:t_train]
    idx = np.arange(t_train, dtype=np.float64)
    d = vals.shape[1]

    trend = None
    work = vals
    if config.detrend:
        slope = np.empty(d)
        intercept = np.empty(d)
        for c in range(d):
            col = vals[:, c]
            ok = np.isfinite(col)
            if ok.sum() < 2:
                raise UnimputableChannelError(
                    f"channel {c} has too few finite samples to fit a trend"
                )
            x, y = idx[ok], col[ok]
            xm, ym = x.mean(), y.mean()
            den = np.sum((x - xm) ** 2)
            slope[c] = np.sum((x - xm) * (y - ym)) / den if den > 0 else 0.0
            intercept[c] = ym - slope[c] * xm
        trend = TrendParams(slope=slope, intercept=intercept)
        work = vals - (idx[:, None] * slope + intercept)

    cmin = np.nanmin(work, axis=0)
    cmax = np.nanmax(work, axis=0)
    scale = ScaleParams(channel_min=cmin, channel_max=cmax,
                        lo=config.scale_lo, hi=config.scale_hi)

    span = cmax - cmin
    scaled = np.where(
        span == 0,
        (config.scale_lo + config.scale_hi) / 2.0,
        (work - cmin) / np.where(span == 0, 1.0, span) * (config.scale_hi - config.scale_lo)
        + config.scale_lo,
    )
    means = np.empty(d)
    for c in range(d):
        col = scaled[:, c]
        ok = np.isfinite(col)
        if not ok.any():
            raise UnimputableChannelError(f"channel {c} has no finite samples")
        means[c] = col[ok].mean()
    return PreprocessParams(trend=trend, scale=scale, impute_means=means,
                            train_length=t_train)


def apply_preprocessing(signal: Signal, params: PreprocessParams) -> Signal:
    """Apply fitted transforms to a whole signal (any length)."""
    vals = signal.values
    idx = np.arange(signal.length, dtype=np.float64)
    if params.trend is not None:
        vals = vals - (idx[:, None] * params.trend.slope + params.trend.intercept)
    span = params.scale.channel_max - params.scale.channel_min
    lo, hi = params.scale.lo, params.scale.hi
    vals = np.where(
        span == 0,
        (lo + hi) / 2.0,
        (vals - params.scale.channel_min) / np.where(span == 0, 1.0, span) * (hi - lo) + lo,
    )
    vals = np.where(np.isfinite(vals), vals, params.impute_means)
    return replace(signal, values=vals)


def fit_pipeline(signal: Signal, config: PipelineConfig) -> FittedPipeline:
    """Preprocess the training prefix and train the model on its windows."""
    signal = replace(signal, target_channel=config.target_channel)
    params = fit_preprocessing(signal, config)
    pre = apply_preprocessing(signal, params)
    prefix = replace(
        pre,
        timestamps=pre.timestamps[: params.train_length],
        values=pre.values[: params.train_length],
    )
    windows = make_windows(prefix, config.model.n)
    model, history = train(windows, config.model)
    return FittedPipeline(config=config, preprocessing=params, model=model,
                          loss_history=history)


def _rec_score_fn(method: str):
    return {"pd": rec_scores_pd, "ad": rec_scores_ad, "dtw": rec_scores_dtw}[method]


def score_signal(fitted: FittedPipeline, signal: Signal) -> ScoreBundle:
    """Compute every anomaly-score series for one signal."""
    config = fitted.config
    signal = replace(signal, target_channel=config.target_channel)
    pre = apply_preprocessing(signal, fitted.preprocessing)
    n = config.model.n
    windows = make_windows(pre, n)
    outputs = predict_all(fitted.model, windows)
    T = pre.length
    truth = pre.target

    fwd_values = np.array([o.forward_pred for o in outputs])
    rev_values = np.array([o.reverse_pred for o in outputs[1:]])
    fwd = forecast_scores(truth, fwd_values, n, "forward")
    rev = forecast_scores(truth, rev_values, 0, "reverse")

    recon = aggregate_reconstructions(outputs, T)
    fusion = config.fusion
    rec_fn = _rec_score_fn(fusion.reconstruction_method)
    if fusion.reconstruction_method == "pd":
        rec = rec_fn(truth, recon)
    else:
        rec = rec_fn(truth, recon, fusion.dtw_half_window)

    W = fusion.resolve_smoothing_window(T)
    fwd = ewma_smooth(fwd, W)
    rev = ewma_smooth(rev, W)
    rec = ewma_smooth(rec, W)

    m = fusion.resolve_mask_length(T) if config.masking else 0
    if m > 0:
        m_fwd = min(m, int(fwd.valid.sum()))
        m_rev = min(m, int(rev.valid.sum()))
        fwd = mask_scores(fwd, m_fwd, fill=0.0)
        rev = mask_scores(rev, m_rev)
        rec = mask_scores(rec, min(m, len(rec)))

    if config.bidirectional:
        pred = bidirectional_fuse(fwd, rev, n, m)
    else:
        pred = fwd
    combined = combine_scores(pred, rec, fusion)
    return ScoreBundle(
        forward=fwd,
        reverse=rev,
        reconstruction_scores=rec,
        prediction=pred,
        combined=combined,
        reconstruction=recon,
    )


def _valid_run(series: ScoreSeries) -> tuple:
    """Bounds of the contiguous valid run (detection operates inside it)."""
    idx = np.flatnonzero(series.valid)
    if idx.size == 0:
        raise AlignmentError("score series has no valid positions to detect on")
    lo, hi = int(idx[0]), int(idx[-1]) + 1
    if hi - lo != idx.size:
        raise AlignmentError("score series validity is not contiguous")
    return lo, hi


def detect_signal(fitted: FittedPipeline, signal: Signal,
                  bundle: ScoreBundle | None = None) -> tuple:
    """Score (unless given) and run adaptive-threshold detection."""
    if bundle is None:
        bundle = score_signal(fitted, signal)
    series = bundle.combined
    lo, hi = _valid_run(series)
    sub = series.scores[lo:hi]
    report = detect(sub, fitted.config.detector)
    if lo:
        shifted = tuple(
            replace(iv, start=iv.start + lo, end=iv.end + lo) for iv in report.intervals
        )
        report = AnomalyReport(intervals=shifted, series_length=len(series))
    else:
        report = AnomalyReport(intervals=report.intervals, series_length=len(series))
    return report, bundle


def evaluate_report(report: AnomalyReport, labels) -> AnomalyReport:
    """Attach contextual-F1 counts (kept intervals vs truth labels)."""
    counts = contextual_f1(labels, report.kept)
    return AnomalyReport(intervals=report.intervals, counts=counts,
                         series_length=report.series_length)
