import numpy as np
import pytest

from aer import io
from aer.detector import DetectorConfig
from aer.model import AerConfig
from aer.pipeline import (
    PipelineConfig,
    apply_preprocessing,
    detect_signal,
    evaluate_report,
    fit_pipeline,
    fit_preprocessing,
    score_signal,
)
from aer.scoring import FusionConfig
from aer.signal import Signal, detrend, impute_mean, scale_minmax
from aer.synthetic import generate_synthetic

FAST_MODEL = dict(n=24, hidden_units=6, epochs=3, batch_size=64, learning_rate=3e-3)


def fast_config(**kw):
    model = AerConfig(**{**FAST_MODEL, **kw.pop("model", {})})
    return PipelineConfig(model=model, **kw)


@pytest.fixture(scope="module")
def spike_setup():
    signal, labels = generate_synthetic("point-spike", 600, 0)
    config = fast_config()
    fitted = fit_pipeline(signal, config)
    return signal, labels, fitted


class TestPreprocessing:
    def test_matches_composed_transforms(self, rng):
        values = rng.normal(size=(120, 2)) + np.arange(120)[:, None] * 0.05
        values[rng.random(size=values.shape) < 0.05] = np.nan
        s = Signal(timestamps=np.arange(120), values=values)
        cfg = PipelineConfig(model=AerConfig(**FAST_MODEL))
        pre = apply_preprocessing(s, fit_preprocessing(s, cfg))
        detrended, _ = detrend(s)
        scaled, _ = scale_minmax(detrended, cfg.scale_lo, cfg.scale_hi)
        expected = impute_mean(scaled)
        assert np.allclose(pre.values, expected.values, atol=1e-12)

    def test_detrend_optional(self, rng):
        s = Signal(timestamps=np.arange(60), values=rng.normal(size=60) + np.arange(60.0))
        cfg = fast_config(detrend=False)
        params = fit_preprocessing(s, cfg)
        assert params.trend is None
        pre = apply_preprocessing(s, params)
        assert pre.values.min() == pytest.approx(-1.0)
        assert pre.values.max() == pytest.approx(1.0)

    def test_split_fraction_fits_on_prefix(self, rng):
        values = rng.normal(size=200)
        values[180] = 50.0  # huge outlier in the reserved suffix
        s = Signal(timestamps=np.arange(200), values=values)
        cfg = fast_config(split_fraction=0.25, detrend=False)
        params = fit_preprocessing(s, cfg)
        assert params.train_length == 150
        # the suffix outlier does not contaminate the scaling statistics
        assert params.scale.channel_max[0] < 10.0
        pre = apply_preprocessing(s, params)
        assert pre.values[180, 0] > 1.0  # maps beyond the nominal range


class TestScoreSignal:
    def test_bundle_shapes_and_validity(self, spike_setup):
        signal, _, fitted = spike_setup
        bundle = score_signal(fitted, signal)
        T, n = signal.length, fitted.config.model.n
        assert len(bundle.forward) == T
        fwd_valid = np.zeros(T, dtype=bool)
        fwd_valid[n:] = True
        assert np.array_equal(bundle.forward.valid, fwd_valid)
        rev_valid = np.zeros(T, dtype=bool)
        rev_valid[: T - n - 1] = True
        assert np.array_equal(bundle.reverse.valid, rev_valid)
        assert bundle.reconstruction_scores.fully_valid
        assert bundle.prediction.fully_valid
        assert bundle.combined.fully_valid
        assert bundle.combined.kind == "combined"
        assert bundle.reconstruction.shape == (T,)

    def test_rec_method_selection(self, spike_setup):
        signal, _, fitted = spike_setup
        from dataclasses import replace

        for method, kind in [("pd", "rec_pd"), ("ad", "rec_ad"), ("dtw", "rec_dtw")]:
            cfg = replace(fitted.config,
                          fusion=replace(fitted.config.fusion, reconstruction_method=method))
            bundle = score_signal(replace(fitted, config=cfg), signal)
            assert bundle.reconstruction_scores.kind == kind

    def test_forward_only_mode(self, spike_setup):
        signal, _, fitted = spike_setup
        from dataclasses import replace

        cfg = replace(fitted.config, bidirectional=False,
                      fusion=replace(fitted.config.fusion, combination="pred"))
        bundle = score_signal(replace(fitted, config=cfg), signal)
        assert bundle.prediction.kind == "pred_forward"
        assert not bundle.prediction.valid[: fitted.config.model.n].any()
        report, _ = detect_signal(replace(fitted, config=cfg), signal, bundle)
        for iv in report.intervals:
            assert iv.start >= fitted.config.model.n

    def test_masking_toggle(self, spike_setup):
        signal, _, fitted = spike_setup
        from dataclasses import replace

        masked = score_signal(fitted, signal)
        cfg = replace(fitted.config, masking=False)
        unmasked = score_signal(replace(fitted, config=cfg), signal)
        m = fitted.config.fusion.resolve_mask_length(signal.length)
        first_valid = np.flatnonzero(unmasked.reverse.valid)[:m]
        assert not np.array_equal(masked.reverse.scores[first_valid],
                                  unmasked.reverse.scores[first_valid])


class TestDetectEvaluate:
    def test_report_and_counts(self, spike_setup):
        signal, labels, fitted = spike_setup
        report, bundle = detect_signal(fitted, signal)
        assert report.series_length == signal.length
        report = evaluate_report(report, labels)
        assert report.counts is not None
        assert report.counts.tp + report.counts.fn == len(labels)

    def test_determinism_byte_identical_exports(self, tmp_path):
        signal, labels = generate_synthetic("point-spike", 600, 4)
        paths = []
        for run in (0, 1):
            cfg = fast_config()
            fitted = fit_pipeline(signal, cfg)
            report, bundle = detect_signal(fitted, signal)
            scores_path = tmp_path / f"scores{run}.csv"
            report_path = tmp_path / f"report{run}.json"
            io.write_scores_csv(bundle.series(), signal.timestamps, scores_path)
            io.write_report_json(io.report_payload(report, signal.timestamps), report_path)
            paths.append((scores_path.read_bytes(), report_path.read_bytes()))
        assert paths[0] == paths[1]

    def test_multichannel_target_selection(self, rng):
        T = 400
        t = np.arange(T)
        target = np.sin(2 * np.pi * t / 40) + rng.normal(0, 0.01, T)
        extra = rng.normal(size=T)
        s = Signal(timestamps=t, values=np.column_stack([extra, target]))
        cfg = fast_config(target_channel=1)
        fitted = fit_pipeline(s, cfg)
        assert fitted.model.d == 2
        report, bundle = detect_signal(fitted, s)
        assert bundle.combined.fully_valid


class TestBench:
    def test_grid_runs_and_tables(self):
        from aer.bench import BenchEntry, aggregate_table, results_csv, run_benchmark

        signal, labels = generate_synthetic("point-spike", 600, 1)
        entries = [BenchEntry(signal=signal, labels=tuple(labels), dataset="synthetic")]
        runs = run_benchmark(entries, fast_config(), ["pred", "mult"])
        assert [r.combination for r in runs] == ["pred", "mult"]
        assert all(r.counts is not None for r in runs)
        assert runs[0].train_s == runs[1].train_s  # model shared per signal
        csv = results_csv(runs)
        assert csv.splitlines()[0].startswith("dataset,signal,combination")
        assert len(csv.strip().splitlines()) == 3
        table = aggregate_table(runs)
        assert "pooled_f1" in table

    def test_failures_isolated(self):
        from aer.bench import BenchEntry, run_benchmark

        good, labels = generate_synthetic("sine-clean", 600, 2)
        bad = Signal(timestamps=np.arange(30), values=np.ones(30), name="too-short")
        entries = [BenchEntry(signal=bad, labels=()),
                   BenchEntry(signal=good, labels=tuple(labels))]
        runs = run_benchmark(entries, fast_config(), ["pred"])
        assert runs[0].error is not None
        assert runs[-1].error is None
