"""File formats: signal CSV, label JSON, score CSV, report JSON, SVG plot.

Signal CSV: header row, column 1 ``timestamp`` (integer), remaining columns
numeric channels; an empty or non-numeric field is a missing sample.
Labels: JSON array of {"start": int, "end": int} in timestamp units.
Reports and score CSVs are written in timestamp units as well, so label
files and report files compare directly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .detector import AnomalyReport, DetectedInterval
from .errors import AerError
from .scoring import ScoreSeries
from .signal import LabeledInterval, Signal

__all__ = [
    "read_signal_csv",
    "write_signal_csv",
    "read_labels_json",
    "write_labels_json",
    "labels_to_positions",
    "intervals_to_payload",
    "report_payload",
    "write_report_json",
    "read_report_json",
    "write_scores_csv",
    "write_scores_svg",
]


def _fmt(x: float) -> str:
    """Shortest exact decimal representation of a float."""
    return repr(float(x))


def read_signal_csv(path, target_channel: int = 0, name: str | None = None) -> Signal:
    """Parse a signal CSV; malformed rows are reported with line numbers."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise AerError(f"cannot read signal file {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines:
        raise AerError(f"{path}:1: empty signal file")
    header = [h.strip() for h in lines[0].split(",")]
    if not header or header[0] != "timestamp":
        raise AerError(f"{path}:1: first column must be 'timestamp', got {header[:1]}")
    d = len(header) - 1
    if d < 1:
        raise AerError(f"{path}:1: no data channels in header")
    timestamps = []
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != d + 1:
            raise AerError(
                f"{path}:{lineno}: expected {d + 1} columns, found {len(parts)}"
            )
        try:
            timestamps.append(int(parts[0]))
        except ValueError as exc:
            raise AerError(f"{path}:{lineno}: bad timestamp {parts[0]!r}") from exc
        row = []
        for field in parts[1:]:
            field = field.strip()
            try:
                row.append(float(field) if field else float("nan"))
            except ValueError:
                row.append(float("nan"))
        rows.append(row)
    if not rows:
        raise AerError(f"{path}:2: no data rows")
    try:
        return Signal(
            timestamps=np.array(timestamps, dtype=np.int64),
            values=np.array(rows, dtype=np.float64),
            target_channel=target_channel,
            name=name or path.stem,
        )
    except ValueError as exc:
        raise AerError(f"{path}: {exc}") from exc


def write_signal_csv(signal: Signal, path) -> None:
    path = Path(path)
    d = signal.n_channels
    header = "timestamp," + ",".join(f"c{i + 1}" for i in range(d))
    lines = [header]
    for t in range(signal.length):
        fields = [str(int(signal.timestamps[t]))]
        for c in range(d):
            v = signal.values[t, c]
            fields.append("" if not np.isfinite(v) else _fmt(v))
        lines.append(",".join(fields))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_labels_json(path) -> list:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise AerError(f"cannot read labels file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise AerError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(payload, list):
        raise AerError(f"{path}: labels must be a JSON array")
    labels = []
    for k, entry in enumerate(payload):
        try:
            labels.append(LabeledInterval(start=int(entry["start"]), end=int(entry["end"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise AerError(f"{path}: label #{k} is malformed: {exc}") from exc
    return labels


def write_labels_json(labels, path) -> None:
    payload = [{"start": int(iv.start), "end": int(iv.end)} for iv in labels]
    Path(path).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")


def labels_to_positions(labels, timestamps: np.ndarray) -> list:
    """Convert timestamp-unit labels to positional intervals, clipped."""
    T = timestamps.shape[0]
    out = []
    for iv in labels:
        lo = int(np.searchsorted(timestamps, iv.start, side="left"))
        hi = int(np.searchsorted(timestamps, iv.end, side="right")) - 1
        lo = min(max(lo, 0), T - 1)
        hi = min(max(hi, lo), T - 1)
        out.append(LabeledInterval(start=lo, end=hi))
    return out


def intervals_to_payload(report: AnomalyReport, timestamps: np.ndarray | None = None) -> list:
    """The report-export contract: array of {start, end, peak, pruned}."""

    def unit(i: int) -> int:
        return int(timestamps[i]) if timestamps is not None else int(i)

    return [
        {
            "start": unit(iv.start),
            "end": unit(iv.end),
            "peak": float(iv.peak_score),
            "pruned": bool(iv.pruned),
        }
        for iv in report.intervals
    ]


def report_payload(report: AnomalyReport, timestamps: np.ndarray | None = None,
                   config_echo: dict | None = None) -> dict:
    payload = {
        "format": "aer-report/1",
        "series_length": int(report.series_length),
        "intervals": intervals_to_payload(report, timestamps),
    }
    if report.counts is not None:
        c = report.counts
        payload["counts"] = {
            "tp": c.tp, "fp": c.fp, "fn": c.fn,
            "precision": c.precision, "recall": c.recall, "f1": c.f1,
            "degenerate": c.degenerate,
        }
    if config_echo is not None:
        payload["config"] = config_echo
    return payload


def write_report_json(payload: dict, path) -> None:
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n",
                          encoding="utf-8")


def read_report_json(path) -> tuple:
    """Read a report file; returns (kept intervals, full payload)."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise AerError(f"cannot read report file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise AerError(f"{path}: invalid JSON: {exc}") from exc
    entries = payload.get("intervals", payload) if isinstance(payload, dict) else payload
    if not isinstance(entries, list):
        raise AerError(f"{path}: no interval array found")
    kept = []
    for k, entry in enumerate(entries):
        try:
            iv = DetectedInterval(
                start=int(entry["start"]),
                end=int(entry["end"]),
                peak_score=float(entry.get("peak", 0.0)),
                pruned=bool(entry.get("pruned", False)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise AerError(f"{path}: interval #{k} is malformed: {exc}") from exc
        if not iv.pruned:
            kept.append(iv)
    return kept, payload


def write_scores_csv(series_list, timestamps: np.ndarray, path) -> None:
    """Score export: one ``index,score,kind`` row per valid position."""
    lines = ["index,score,kind"]
    for series in series_list:
        if not isinstance(series, ScoreSeries):
            raise TypeError(f"expected ScoreSeries, got {type(series)!r}")
        for i in np.flatnonzero(series.valid):
            lines.append(f"{int(timestamps[i])},{_fmt(series.scores[i])},{series.kind}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_scores_svg(series: ScoreSeries, report: AnomalyReport | None, path,
                     width: int = 960, height: int = 240) -> None:
    """Minimal deterministic SVG line plot with detected intervals shaded."""
    T = len(series)
    scores = series.scores
    smax = float(scores.max()) if T else 1.0
    smax = smax if smax > 0 else 1.0
    margin = 10.0

    def sx(i: float) -> float:
        return margin + (width - 2 * margin) * (i / max(T - 1, 1))

    def sy(v: float) -> float:
        return height - margin - (height - 2 * margin) * (v / smax)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if report is not None:
        for iv in report.intervals:
            color = "#f4c7c3" if not iv.pruned else "#eeeeee"
            x0, x1 = sx(iv.start), sx(iv.end + 1)
            parts.append(
                f'<rect x="{x0:.2f}" y="{margin:.2f}" width="{max(x1 - x0, 1.0):.2f}" '
                f'height="{height - 2 * margin:.2f}" fill="{color}"/>'
            )
    points = " ".join(f"{sx(i):.2f},{sy(scores[i]):.2f}" for i in range(T))
    parts.append(
        f'<polyline points="{points}" fill="none" stroke="#1a56a0" stroke-width="1"/>'
    )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")
