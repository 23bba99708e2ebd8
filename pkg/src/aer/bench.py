"""Benchmark orchestration: run the pipeline over signals, tabulate results.

Each signal is trained once; every requested combination mode reuses that
model, so the training time column repeats per combination row while the
latency column (scoring + detection + evaluation) is measured per row.
Per-signal failures are logged and excluded from the aggregates.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace

from .evaluate import EvalCounts, contextual_f1
from .pipeline import PipelineConfig, detect_signal, fit_pipeline, score_signal
from .scoring import COMBINATIONS
from .signal import Signal

__all__ = ["BenchEntry", "BenchRun", "run_benchmark", "results_csv", "aggregate_table"]

log = logging.getLogger("aer.bench")

CSV_HEADER = "dataset,signal,combination,f1,precision,recall,tp,fp,fn,train_s,latency_s"


@dataclass(frozen=True)
class BenchEntry:
    """One benchmark signal with its ground truth (positional intervals)."""

    signal: Signal
    labels: tuple
    dataset: str = "default"


@dataclass(frozen=True)
class BenchRun:
    dataset: str
    signal: str
    combination: str
    train_s: float
    latency_s: float
    counts: EvalCounts | None
    error: str | None = None


def run_benchmark(entries, config: PipelineConfig, combinations=None) -> list:
    """Train/score/detect/evaluate each entry for each combination mode."""
    combos = list(combinations) if combinations else list(COMBINATIONS)
    for combo in combos:
        if combo not in COMBINATIONS:
            raise ValueError(f"unknown combination {combo!r}")
    runs: list = []
    for entry in entries:
        name = entry.signal.name
        try:
            t0 = time.perf_counter()
            fitted = fit_pipeline(entry.signal, config)
            train_s = time.perf_counter() - t0
        except Exception as exc:  # noqa: BLE001 - per-signal isolation
            log.warning("signal %s failed to train: %s", name, exc)
            runs.append(BenchRun(dataset=entry.dataset, signal=name, combination="-",
                                 train_s=0.0, latency_s=0.0, counts=None, error=str(exc)))
            continue
        for combo in combos:
            try:
                t0 = time.perf_counter()
                run_cfg = replace(config, fusion=replace(config.fusion, combination=combo))
                run_fitted = replace(fitted, config=run_cfg)
                bundle = score_signal(run_fitted, entry.signal)
                report, _ = detect_signal(run_fitted, entry.signal, bundle)
                counts = contextual_f1(entry.labels, report.kept)
                latency = time.perf_counter() - t0
                runs.append(BenchRun(dataset=entry.dataset, signal=name, combination=combo,
                                     train_s=train_s, latency_s=latency, counts=counts))
            except Exception as exc:  # noqa: BLE001
                log.warning("signal %s combination %s failed: %s", name, combo, exc)
                runs.append(BenchRun(dataset=entry.dataset, signal=name, combination=combo,
                                     train_s=train_s, latency_s=0.0, counts=None,
                                     error=str(exc)))
    return runs


def results_csv(runs) -> str:
    """The results table in its CSV export format."""
    lines = [CSV_HEADER]
    for run in runs:
        if run.counts is None:
            continue
        c = run.counts
        lines.append(
            f"{run.dataset},{run.signal},{run.combination},"
            f"{c.f1!r},{c.precision!r},{c.recall!r},{c.tp},{c.fp},{c.fn},"
            f"{run.train_s:.3f},{run.latency_s:.3f}"
        )
    return "\n".join(lines) + "\n"


def aggregate_table(runs) -> str:
    """Aligned text summary: pooled counts per (dataset, combination).

    The pooled F1 uses summed TP/FP/FN over the dataset's signals; the mean
    column is the unweighted average of per-signal F1 scores.
    """
    groups: dict = {}
    for run in runs:
        if run.counts is None:
            continue
        key = (run.dataset, run.combination)
        groups.setdefault(key, []).append(run.counts)
    header = f"{'dataset':<16} {'combo':<6} {'signals':>7} {'pooled_f1':>9} {'mean_f1':>8} {'tp':>4} {'fp':>4} {'fn':>4}"
    lines = [header, "-" * len(header)]
    for (dataset, combo), counts in sorted(groups.items()):
        tp = sum(c.tp for c in counts)
        fp = sum(c.fp for c in counts)
        fn = sum(c.fn for c in counts)
        pooled = EvalCounts.from_counts(tp, fp, fn)
        mean_f1 = sum(c.f1 for c in counts) / len(counts)
        lines.append(
            f"{dataset:<16} {combo:<6} {len(counts):>7} {pooled.f1:>9.3f} "
            f"{mean_f1:>8.3f} {tp:>4} {fp:>4} {fn:>4}"
        )
    failures = [run for run in runs if run.counts is None]
    if failures:
        lines.append(f"excluded failures: {len(failures)}")
    return "\n".join(lines)
