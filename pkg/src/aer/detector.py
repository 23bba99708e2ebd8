"""Locally adaptive thresholding, interval merging, and pruning.

A sliding window computes a local threshold (window mean plus z population
standard deviations); an index is anomalous when its score strictly exceeds
the threshold of any window containing it.  Runs of anomalous indices merge
into intervals, and intervals whose peak is not sufficiently separated from
the next-sorted peak are reclassified as normal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import AlignmentError
from .evaluate import EvalCounts
from .scoring import ScoreSeries

__all__ = [
    "DetectorConfig",
    "DetectedInterval",
    "AnomalyReport",
    "adaptive_threshold",
    "prune_intervals",
    "detect",
]


@dataclass(frozen=True)
class DetectorConfig:
    """Thresholding settings; window/step default to ceil(T/3), ceil(T/30)."""

    window_size: int | None = None
    step_size: int | None = None
    z: float = 4.0
    theta: float = 0.13

    def __post_init__(self):
        if self.window_size is not None and self.window_size < 2:
            raise ValueError("window_size must be >= 2")
        if self.step_size is not None and self.step_size < 1:
            raise ValueError("step_size must be >= 1")
        if (
            self.window_size is not None
            and self.step_size is not None
            and self.step_size > self.window_size
        ):
            raise ValueError("step_size must not exceed window_size")
        if self.z <= 0:
            raise ValueError("z must be positive")
        if not 0.0 <= self.theta < 1.0:
            raise ValueError("theta must be in [0, 1)")

    def resolve(self, T: int) -> tuple[int, int]:
        w = self.window_size if self.window_size is not None else math.ceil(T / 3)
        w = max(2, min(w, T))
        s = self.step_size if self.step_size is not None else math.ceil(T / 30)
        s = max(1, min(s, w))
        return w, s


@dataclass(frozen=True)
class DetectedInterval:
    """Inclusive index interval with its peak score and pruning flag."""

    start: int
    end: int
    peak_score: float
    pruned: bool = False

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"interval start {self.start} > end {self.end}")

    def overlaps(self, other) -> bool:
        return self.start <= other.end and other.start <= self.end


@dataclass(frozen=True)
class AnomalyReport:
    """All detected intervals (pruned ones flagged) plus optional eval counts."""

    intervals: tuple
    counts: EvalCounts | None = None
    series_length: int = 0

    @property
    def kept(self) -> tuple:
        return tuple(iv for iv in self.intervals if not iv.pruned)

    @property
    def pruned(self) -> tuple:
        return tuple(iv for iv in self.intervals if iv.pruned)


def _window_spans(T: int, w: int, step: int) -> list:
    """Half-open [lo, hi) sliding spans; a shorter tail window keeps full coverage."""
    if w >= T:
        return [(0, T)]
    starts = list(range(0, T - w + 1, step))
    spans = [(s, s + w) for s in starts]
    if spans[-1][1] < T:
        spans.append((starts[-1] + step, T))
    return spans


def _as_score_array(scores) -> np.ndarray:
    if isinstance(scores, ScoreSeries):
        if not scores.fully_valid:
            raise AlignmentError(
                "adaptive_threshold needs a fully valid score series; "
                "detect on the valid subrange instead"
            )
        return scores.scores
    return np.asarray(scores, dtype=np.float64)


def adaptive_threshold(scores, config: DetectorConfig) -> list:
    """Find intervals whose scores exceed any containing window's threshold.

    The threshold of a window is mean + z * population std of the scores in
    the window; exceedance is strict, so constant scores yield nothing.
    """
    values = _as_score_array(scores)
    T = values.shape[0]
    if T == 0:
        return []
    w, step = config.resolve(T)
    flagged = np.zeros(T, dtype=bool)
    for lo, hi in _window_spans(T, w, step):
        win = values[lo:hi]
        thr = win.mean() + config.z * win.std()
        flagged[lo:hi] |= win > thr

    intervals = []
    run_start = None
    for i in range(T + 1):
        inside = i < T and flagged[i]
        if inside and run_start is None:
            run_start = i
        elif not inside and run_start is not None:
            peak = float(values[run_start:i].max())
            intervals.append(DetectedInterval(start=run_start, end=i - 1, peak_score=peak))
            run_start = None
    return intervals


def prune_intervals(intervals, theta: float) -> list:
    """Flag weakly separated intervals as pruned.

    Peaks are sorted descending (stable by start on ties); walking down the
    sorted list, the first interval whose percentage drop to the next peak
    is <= theta is reclassified as normal together with every later-sorted
    interval.  With zero or one interval nothing is pruned.
    """
    ivs = list(intervals)
    if len(ivs) <= 1:
        return [replace(iv, pruned=False) for iv in ivs]
    order = sorted(range(len(ivs)), key=lambda k: (-ivs[k].peak_score, ivs[k].start))
    cut = None
    for pos in range(len(order) - 1):
        a = ivs[order[pos]].peak_score
        b = ivs[order[pos + 1]].peak_score
        drop = (a - b) / a if a > 0 else 0.0
        if drop <= theta:
            cut = pos
            break
    pruned_ids = set(order[cut:]) if cut is not None else set()
    return [replace(iv, pruned=(k in pruned_ids)) for k, iv in enumerate(ivs)]


def detect(scores, config: DetectorConfig) -> AnomalyReport:
    """Threshold then prune; the report keeps pruned intervals, flagged."""
    values = _as_score_array(scores)
    intervals = prune_intervals(adaptive_threshold(values, config), config.theta)
    return AnomalyReport(intervals=tuple(intervals), series_length=values.shape[0])
