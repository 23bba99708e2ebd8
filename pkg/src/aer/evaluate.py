"""Overlap-based (contextual) precision/recall/F1 for interval detections."""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["EvalCounts", "contextual_f1"]


@dataclass(frozen=True)
class EvalCounts:
    """Interval-overlap confusion counts and the derived rates.

    ``degenerate`` marks the no-truth/no-detection case, where every rate
    is reported as 0 by convention.
    """

    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    degenerate: bool = False

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "EvalCounts":
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = (
            2.0 * precision * recall / (precision + recall)
            if precision + recall > 0
            else 0.0
        )
        return cls(
            tp=tp,
            fp=fp,
            fn=fn,
            precision=precision,
            recall=recall,
            f1=f1,
            degenerate=(tp + fp + fn == 0),
        )


def _bounds(interval) -> tuple:
    if hasattr(interval, "start"):
        return int(interval.start), int(interval.end)
    start, end = interval
    return int(start), int(end)


def contextual_f1(truth, detected) -> EvalCounts:
    """Score detections by interval overlap.

    A truth interval overlapped by any detection is a TP, otherwise an FN;
    a detection overlapping no truth interval is an FP.  Overlap means the
    inclusive ranges intersect.  Counts are truth-sided for TP/FN and
    detection-sided for FP, so the metric is not symmetric in its arguments.
    """
    truth_bounds = [_bounds(iv) for iv in truth]
    det_bounds = [_bounds(iv) for iv in detected]
    tp = 0
    fn = 0
    for ts, te in truth_bounds:
        if any(ts <= de and ds <= te for ds, de in det_bounds):
            tp += 1
        else:
            fn += 1
    fp = sum(
        1
        for ds, de in det_bounds
        if not any(ts <= de and ds <= te for ts, te in truth_bounds)
    )
    return EvalCounts.from_counts(tp=tp, fp=fp, fn=fn)
