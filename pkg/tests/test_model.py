import json

import numpy as np
import pytest

from aer.errors import DimensionError, InsufficientDataError, TrainingDivergedError
from aer.model import (
    AerConfig,
    ModelOutput,
    aer_forward,
    aer_loss,
    gradient_check,
    init_model,
    load_checkpoint,
    model_from_dict,
    model_to_dict,
    predict_all,
    save_checkpoint,
    train,
)
from aer.signal import Signal, WindowSet, make_windows


def small_model(rng, n=8, d=1, b=4):
    return init_model(n, d, b, rng)


def sine_windows(T=120, n=16, d=1, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(T)
    values = np.sin(2 * np.pi * t / 24)[:, None] * np.ones((1, d))
    values = values + rng.normal(0, 0.01, size=(T, d))
    s = Signal(timestamps=t, values=values)
    return make_windows(s, n)


class TestForward:
    def test_output_arity_random_shapes(self, rng):
        for n, d, b in [(4, 1, 2), (9, 3, 5), (16, 2, 4)]:
            m = init_model(n, d, b, rng)
            out = aer_forward(m, rng.normal(size=(n, d)))
            assert out.reconstruction.shape == (n,)
            total = np.concatenate([[out.reverse_pred], out.reconstruction, [out.forward_pred]])
            assert total.shape == (n + 2,)
            assert np.all(np.isfinite(total))

    def test_alignment_positions(self, rng):
        m = small_model(rng, n=4)
        out = aer_forward(m, rng.normal(size=(4, 1)), start_index=7)
        assert out.start_index == 7
        # reverse aligns to 6, reconstruction to 7..10, forward to 11

    def test_determinism(self, rng):
        m = small_model(rng)
        w = rng.normal(size=(8, 1))
        a = aer_forward(m, w)
        b = aer_forward(m, w)
        assert a.reverse_pred == b.reverse_pred
        assert np.array_equal(a.reconstruction, b.reconstruction)
        assert a.forward_pred == b.forward_pred

    def test_same_seed_same_params(self):
        m1 = init_model(8, 1, 4, np.random.default_rng(7))
        m2 = init_model(8, 1, 4, np.random.default_rng(7))
        for k in m1.params:
            assert np.array_equal(m1.params[k], m2.params[k])

    def test_shape_mismatch(self, rng):
        m = small_model(rng)
        with pytest.raises(DimensionError):
            aer_forward(m, rng.normal(size=(9, 1)))


class TestLoss:
    def out(self, r, y, f):
        return ModelOutput(reverse_pred=r, reconstruction=np.asarray(y, dtype=float),
                           forward_pred=f, start_index=0)

    def test_zero_when_exact(self):
        o = self.out(0.5, [1.0, 2.0], -1.0)
        assert aer_loss((0.5, [1.0, 2.0], -1.0), o, 0.5) == 0.0

    def test_gamma_zero_is_reconstruction_mse(self):
        o = self.out(9.0, [1.0, 3.0], 9.0)
        loss = aer_loss((0.0, [0.0, 0.0], 0.0), o, 0.0)
        assert loss == pytest.approx((1.0 + 9.0) / 2)

    def test_gamma_one_direct_substitution(self):
        # reverse error 1, forward error 3 -> 0.5*1 + 0.5*9 = 5
        o = self.out(1.0, [0.0, 0.0, 0.0], 3.0)
        loss = aer_loss((0.0, [5.0, 5.0, 5.0], 0.0), o, 1.0)
        assert loss == pytest.approx(5.0)

    def test_linear_interpolation_in_gamma(self, rng):
        y = rng.normal(size=6)
        truth = (0.3, rng.normal(size=6), -0.7)
        o = self.out(0.9, y, 0.1)
        pred = 0.5 * (truth[0] - 0.9) ** 2 + 0.5 * (truth[2] - 0.1) ** 2
        rec = np.mean((np.asarray(truth[1]) - y) ** 2)
        for gamma in (0.0, 0.25, 0.5, 1.0):
            expected = gamma * pred + (1 - gamma) * rec
            assert aer_loss(truth, o, gamma) == pytest.approx(expected, rel=1e-12)


class TestGradientCheck:
    def test_small_model_passes(self, rng):
        m = small_model(rng)
        w = rng.normal(size=(8, 1))
        truth = (0.2, rng.normal(size=8), -0.4)
        err = gradient_check(m, w, truth, gamma=0.5, epsilon=1e-5, n_coords=60)
        assert err < 1e-4

    def test_zero_learning_signal_vacuous(self, rng):
        m = small_model(rng)
        w = rng.normal(size=(8, 1))
        out = aer_forward(m, w)
        truth = (out.reverse_pred, out.reconstruction, out.forward_pred)
        err = gradient_check(m, w, truth, gamma=0.5, epsilon=1e-5)
        assert err < 1e-4

    def test_epsilon_stability(self, rng):
        m = small_model(rng)
        w = rng.normal(size=(8, 1))
        truth = (0.2, rng.normal(size=8), -0.4)
        e4 = gradient_check(m, w, truth, 0.5, epsilon=1e-4, rng_seed=5)
        e5 = gradient_check(m, w, truth, 0.5, epsilon=1e-5, rng_seed=5)
        assert e4 < 1e-4 and e5 < 1e-4

    def test_epsilon_bounds(self, rng):
        m = small_model(rng)
        with pytest.raises(ValueError):
            gradient_check(m, rng.normal(size=(8, 1)), (0.0, np.zeros(8), 0.0), 0.5,
                           epsilon=1e-2)


class TestTrain:
    CFG = dict(n=16, hidden_units=4, epochs=8, batch_size=32, learning_rate=3e-3)

    def test_constant_signal_loss_decreases(self):
        s = Signal(timestamps=np.arange(80), values=np.full(80, 0.5))
        ws = make_windows(s, 16)
        model, history = train(ws, AerConfig(**{**self.CFG, "epochs": 20}))
        assert history[-1] < history[0]

    def test_sine_history_smoothed_nonincreasing(self):
        ws = sine_windows()
        _, history = train(ws, AerConfig(**{**self.CFG, "epochs": 15}))
        smoothed = np.convolve(history, np.ones(5) / 5, mode="valid")
        assert np.all(np.diff(smoothed) <= 1e-4)

    def test_seed_determinism(self):
        ws = sine_windows()
        cfg = AerConfig(**self.CFG, rng_seed=3)
        m1, h1 = train(ws, cfg)
        m2, h2 = train(ws, cfg)
        assert h1 == h2
        for k in m1.params:
            assert np.array_equal(m1.params[k], m2.params[k])

    def test_no_trainable_windows(self):
        s = Signal(timestamps=np.arange(17), values=np.arange(17.0))
        ws = make_windows(s, 16)  # single window, missing its previous target
        with pytest.raises(InsufficientDataError):
            train(ws, AerConfig(**self.CFG))

    def test_nan_input_raises_divergence(self):
        ws = sine_windows()
        bad = ws.windows.copy()
        bad[2, 3, 0] = np.nan
        ws_bad = WindowSet(windows=bad, start_indices=ws.start_indices,
                           prev_targets=ws.prev_targets, next_targets=ws.next_targets,
                           window_size=ws.window_size, series_length=ws.series_length)
        with pytest.raises(TrainingDivergedError) as err:
            train(ws_bad, AerConfig(**self.CFG))
        assert err.value.epoch == 0

    def test_config_window_mismatch(self):
        ws = sine_windows(n=16)
        with pytest.raises(DimensionError):
            train(ws, AerConfig(n=8, hidden_units=4))


class TestPredictAll:
    def test_empty_windowset(self, rng):
        m = small_model(rng, n=4)
        ws = WindowSet(windows=np.empty((0, 4, 1)), start_indices=np.empty(0, dtype=int),
                       prev_targets=np.empty(0), next_targets=np.empty(0),
                       window_size=4, series_length=10)
        assert predict_all(m, ws) == []

    def test_matches_single_window_forward(self, rng):
        ws = sine_windows(T=60, n=8)
        m = small_model(rng, n=8)
        outs = predict_all(m, ws)
        assert len(outs) == len(ws)
        for k in (0, 7, len(ws) - 1):
            single = aer_forward(m, ws.windows[k], start_index=k)
            assert outs[k].start_index == k
            assert outs[k].reverse_pred == pytest.approx(single.reverse_pred, rel=1e-10)
            assert np.allclose(outs[k].reconstruction, single.reconstruction, rtol=1e-10)
            assert outs[k].forward_pred == pytest.approx(single.forward_pred, rel=1e-10)

    def test_dimension_mismatch(self, rng):
        ws = sine_windows(T=60, n=8)
        m = small_model(rng, n=9)
        with pytest.raises(DimensionError):
            predict_all(m, ws)


class TestCheckpoint:
    def test_roundtrip_bitwise(self, rng, tmp_path):
        m = small_model(rng)
        path = tmp_path / "model.json"
        save_checkpoint(m, path, extra={"note": "t"})
        loaded, payload = load_checkpoint(path)
        assert payload["note"] == "t"
        for k in m.params:
            assert np.array_equal(loaded.params[k], m.params[k])
        # a re-saved checkpoint is byte-identical
        path2 = tmp_path / "model2.json"
        save_checkpoint(loaded, path2, extra={"note": "t"})
        assert path.read_bytes() == path2.read_bytes()

    def test_dict_roundtrip(self, rng):
        m = small_model(rng, n=5, d=2, b=3)
        again = model_from_dict(json.loads(json.dumps(model_to_dict(m))))
        assert again.n == 5 and again.d == 2 and again.hidden_units == 3
        for k in m.params:
            assert np.array_equal(again.params[k], m.params[k])

    def test_malformed_payload(self, tmp_path):
        from aer.errors import CheckpointError

        path = tmp_path / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)
