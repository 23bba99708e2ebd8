"""Command-line front end: fit, detect, evaluate, bench, synth.

The AER_LOG environment variable sets the logging level (DEBUG, INFO, ...).
Every command echoes the resolved configuration into its JSON outputs and
exits non-zero when the requested artifact could not be fully written.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from . import io
from .bench import BenchEntry, CSV_HEADER, aggregate_table, results_csv, run_benchmark
from .config import config_from_dict, config_to_dict, load_config_file
from .errors import AerError, ConfigError
from .evaluate import contextual_f1
from .model import load_checkpoint, model_from_dict, model_to_dict
from .pipeline import (
    FittedPipeline,
    PipelineConfig,
    PreprocessParams,
    detect_signal,
    evaluate_report,
    fit_pipeline,
    score_signal,
)
from .signal import ScaleParams, TrendParams
from .synthetic import SYNTHETIC_KINDS, generate_synthetic

log = logging.getLogger("aer")


def _setup_logging() -> None:
    level = os.environ.get("AER_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _load_config(path, seed) -> PipelineConfig:
    config = load_config_file(path) if path else PipelineConfig()
    if seed is not None:
        config = replace(config, model=replace(config.model, rng_seed=seed))
    return config


def _fail(message: str) -> None:
    raise click.ClickException(message)


@click.group()
def main() -> None:
    """Anomaly detection for time series via joint prediction/reconstruction."""
    _setup_logging()


@main.command()
@click.argument("signal_path", type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="YAML pipeline config.")
@click.option("--seed", type=int, default=None, help="Override the model seed.")
@click.option("--out-dir", type=click.Path(), default=".", show_default=True)
def fit(signal_path, config_path, seed, out_dir):
    """Train a model on SIGNAL_PATH and write a checkpoint."""
    try:
        config = _load_config(config_path, seed)
        signal = io.read_signal_csv(signal_path, target_channel=config.target_channel)
        fitted = fit_pipeline(signal, config)
    except (AerError, ValueError) as exc:
        _fail(str(exc))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / f"{signal.name}.checkpoint.json"
    payload = {
        "format": "aer-checkpoint/1",
        "config": config_to_dict(config),
        "signal": signal.name,
        "preprocessing": _preprocessing_payload(fitted.preprocessing),
        "model": model_to_dict(fitted.model),
        "loss_history": [float(x) for x in fitted.loss_history],
    }
    ckpt.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n",
                    encoding="utf-8")
    click.echo(f"final loss {fitted.loss_history[-1]:.6g}")
    click.echo(f"checkpoint written to {ckpt}")


def _preprocessing_payload(params: PreprocessParams) -> dict:
    return {
        "trend": None if params.trend is None else {
            "slope": [float(x) for x in params.trend.slope],
            "intercept": [float(x) for x in params.trend.intercept],
        },
        "scale": {
            "channel_min": [float(x) for x in params.scale.channel_min],
            "channel_max": [float(x) for x in params.scale.channel_max],
            "lo": params.scale.lo,
            "hi": params.scale.hi,
        },
        "impute_means": [float(x) for x in params.impute_means],
        "train_length": params.train_length,
    }


def _preprocessing_from_payload(payload: dict) -> PreprocessParams:
    trend = payload.get("trend")
    scale = payload["scale"]
    return PreprocessParams(
        trend=None if trend is None else TrendParams(
            slope=np.array(trend["slope"]), intercept=np.array(trend["intercept"])
        ),
        scale=ScaleParams(
            channel_min=np.array(scale["channel_min"]),
            channel_max=np.array(scale["channel_max"]),
            lo=float(scale["lo"]), hi=float(scale["hi"]),
        ),
        impute_means=np.array(payload["impute_means"]),
        train_length=int(payload["train_length"]),
    )


def _load_fitted(checkpoint_path) -> FittedPipeline:
    model, payload = load_checkpoint(checkpoint_path)
    try:
        config = config_from_dict(payload["config"])
        preprocessing = _preprocessing_from_payload(payload["preprocessing"])
    except (KeyError, TypeError, ConfigError) as exc:
        raise AerError(f"checkpoint {checkpoint_path} is incomplete: {exc}") from exc
    return FittedPipeline(config=config, preprocessing=preprocessing, model=model,
                          loss_history=list(payload.get("loss_history", [])))


@main.command()
@click.argument("signal_path", type=click.Path())
@click.argument("checkpoint_path", type=click.Path())
@click.option("--combine", type=click.Choice(["pred", "rec", "sum", "mult"]),
              default=None, help="Override the score combination mode.")
@click.option("--mask/--no-mask", "masking", default=None,
              help="Override start-of-sequence score masking.")
@click.option("--bidirectional/--forward-only", "bidirectional", default=None,
              help="Override bi-directional prediction scoring.")
@click.option("--svg/--no-svg", "svg", default=False, help="Also write an SVG plot.")
@click.option("--out-dir", type=click.Path(), default=".", show_default=True)
def detect(signal_path, checkpoint_path, combine, masking, bidirectional, svg, out_dir):
    """Score SIGNAL_PATH with a trained checkpoint and detect anomalies."""
    try:
        fitted = _load_fitted(checkpoint_path)
        config = fitted.config
        if combine is not None:
            config = replace(config, fusion=replace(config.fusion, combination=combine))
        if masking is not None:
            config = replace(config, masking=masking)
        if bidirectional is not None:
            config = replace(config, bidirectional=bidirectional)
        fitted = replace(fitted, config=config)
        signal = io.read_signal_csv(signal_path, target_channel=config.target_channel)
        bundle = score_signal(fitted, signal)
        report, _ = detect_signal(fitted, signal, bundle)
    except (AerError, ValueError) as exc:
        _fail(str(exc))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    echo = config_to_dict(config)
    report_path = out / f"{signal.name}.report.json"
    io.write_report_json(io.report_payload(report, signal.timestamps, echo), report_path)
    scores_path = out / f"{signal.name}.scores.csv"
    io.write_scores_csv(bundle.series(), signal.timestamps, scores_path)
    if svg:
        io.write_scores_svg(bundle.combined, report, out / f"{signal.name}.scores.svg")
    kept = report.kept
    click.echo(f"{len(kept)} interval(s) kept, {len(report.pruned)} pruned")
    click.echo(f"report written to {report_path}")


@main.command()
@click.argument("report_path", type=click.Path())
@click.argument("labels_path", type=click.Path())
@click.option("--out-dir", type=click.Path(), default=".", show_default=True)
def evaluate(report_path, labels_path, out_dir):
    """Contextual F1 of a report against ground-truth labels."""
    try:
        kept, _payload = io.read_report_json(report_path)
        labels = io.read_labels_json(labels_path)
    except AerError as exc:
        _fail(str(exc))
    counts = contextual_f1(labels, kept)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "tp": counts.tp, "fp": counts.fp, "fn": counts.fn,
        "precision": counts.precision, "recall": counts.recall, "f1": counts.f1,
        "degenerate": counts.degenerate,
    }
    eval_path = out / (Path(report_path).stem + ".evaluation.json")
    eval_path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n",
                         encoding="utf-8")
    click.echo(f"TP={counts.tp} FP={counts.fp} FN={counts.fn} "
               f"precision={counts.precision:.3f} recall={counts.recall:.3f} "
               f"f1={counts.f1:.3f}")
    click.echo(f"evaluation written to {eval_path}")


@main.command()
@click.argument("manifest_path", type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--combine", type=click.Choice(["pred", "rec", "sum", "mult", "all"]),
              default="all", show_default=True)
@click.option("--seed", type=int, default=None, help="Override the model seed.")
@click.option("--out-dir", type=click.Path(), default=".", show_default=True)
def bench(manifest_path, config_path, combine, seed, out_dir):
    """Run the benchmark over a manifest of signals; write a results CSV.

    Manifest entries either reference files ({"name", "csv", "labels",
    "dataset"}) or synthetic signals ({"name", "synthetic", "T", "seed",
    "noise_sigma"}).
    """
    try:
        config = _load_config(config_path, seed)
        manifest = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    except (AerError, OSError, json.JSONDecodeError) as exc:
        _fail(f"cannot read manifest {manifest_path}: {exc}")
    if not isinstance(manifest, list):
        _fail(f"{manifest_path}: manifest must be a JSON array")
    entries = []
    for k, item in enumerate(manifest):
        try:
            entries.append(_manifest_entry(item, config))
        except (AerError, KeyError, TypeError, ValueError) as exc:
            log.warning("manifest entry #%d skipped: %s", k, exc)
            click.echo(f"warning: manifest entry #{k} skipped: {exc}", err=True)
    combos = None if combine == "all" else [combine]
    runs = run_benchmark(entries, config, combos)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "results.csv"
    csv_path.write_text(results_csv(runs) if runs else CSV_HEADER + "\n",
                        encoding="utf-8")
    (out / "run-config.json").write_text(
        json.dumps(config_to_dict(config), indent=1, sort_keys=True) + "\n",
        encoding="utf-8")
    if runs:
        click.echo(aggregate_table(runs))
    click.echo(f"results written to {csv_path}")


def _manifest_entry(item: dict, config: PipelineConfig) -> BenchEntry:
    name = item.get("name")
    dataset = item.get("dataset", "default")
    if "synthetic" in item:
        kind = item["synthetic"]
        signal, labels = generate_synthetic(
            kind, int(item.get("T", 2000)), int(item.get("seed", 0)),
            float(item.get("noise_sigma", 0.01)))
        if name:
            signal = replace(signal, name=name)
        return BenchEntry(signal=signal, labels=tuple(labels), dataset=dataset)
    signal = io.read_signal_csv(item["csv"], target_channel=config.target_channel,
                                name=name)
    labels = io.read_labels_json(item["labels"]) if item.get("labels") else []
    positions = io.labels_to_positions(labels, signal.timestamps)
    return BenchEntry(signal=signal, labels=tuple(positions), dataset=dataset)


@main.command()
@click.argument("kind", type=click.Choice(SYNTHETIC_KINDS))
@click.option("--t", "length", type=int, default=2000, show_default=True,
              help="Series length.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--noise-sigma", type=float, default=0.01, show_default=True)
@click.option("--name", type=str, default=None, help="Base name for output files.")
@click.option("--out-dir", type=click.Path(), default=".", show_default=True)
def synth(kind, length, seed, noise_sigma, name, out_dir):
    """Generate a synthetic signal CSV plus its labels JSON."""
    try:
        signal, labels = generate_synthetic(kind, length, seed, noise_sigma)
    except ValueError as exc:
        _fail(str(exc))
    if name:
        signal = replace(signal, name=name)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{signal.name}.csv"
    labels_path = out / f"{signal.name}.labels.json"
    io.write_signal_csv(signal, csv_path)
    io.write_labels_json(labels, labels_path)
    click.echo(f"signal written to {csv_path}")
    click.echo(f"labels written to {labels_path}")


if __name__ == "__main__":
    main(prog_name="aer")
