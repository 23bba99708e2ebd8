"""Unsupervised time-series anomaly detection.

A joint recurrent model emits a reverse one-step prediction, a window
reconstruction, and a forward one-step prediction per input window; the
resulting prediction- and reconstruction-based anomaly scores are smoothed,
masked, fused across directions, combined, and thresholded into anomalous
intervals.  See README.md for the pipeline walkthrough and the CLI.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .detector import AnomalyReport, DetectedInterval, DetectorConfig, adaptive_threshold, detect, prune_intervals
from .evaluate import EvalCounts, contextual_f1
from .model import (
    AerConfig,
    AerModel,
    ModelOutput,
    aer_forward,
    aer_loss,
    gradient_check,
    predict_all,
    train,
)
from .pipeline import (
    FittedPipeline,
    PipelineConfig,
    ScoreBundle,
    detect_signal,
    evaluate_report,
    fit_pipeline,
    score_signal,
)
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
from .signal import (
    LabeledInterval,
    Signal,
    WindowSet,
    detrend,
    impute_mean,
    make_windows,
    retrend,
    scale_minmax,
    unscale_minmax,
)
from .synthetic import SYNTHETIC_KINDS, generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "__version__",
    # signal
    "Signal", "LabeledInterval", "WindowSet",
    "detrend", "retrend", "scale_minmax", "unscale_minmax", "impute_mean", "make_windows",
    # model
    "AerConfig", "AerModel", "ModelOutput",
    "aer_forward", "aer_loss", "train", "predict_all", "gradient_check",
    # scoring
    "ScoreSeries", "FusionConfig",
    "forecast_scores", "aggregate_reconstructions",
    "rec_scores_pd", "rec_scores_ad", "rec_scores_dtw",
    "ewma_smooth", "mask_scores", "bidirectional_fuse", "combine_scores",
    # detector
    "DetectorConfig", "DetectedInterval", "AnomalyReport",
    "adaptive_threshold", "prune_intervals", "detect",
    # evaluation / synthetic / pipeline
    "EvalCounts", "contextual_f1",
    "SYNTHETIC_KINDS", "generate_synthetic",
    "PipelineConfig", "FittedPipeline", "ScoreBundle",
    "fit_pipeline", "score_signal", "detect_signal", "evaluate_report",
]
