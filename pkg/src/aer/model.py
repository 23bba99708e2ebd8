"""Joint prediction/reconstruction recurrent model.

The encoder is one bidirectional LSTM layer (b units per direction) whose
final states form a 2b latent vector.  The decoder repeats that latent
n+2 times, runs its own bidirectional LSTM layer over the repetitions, and
a per-step affine head emits one scalar per position.  The n+2 outputs per
window split into a one-step reverse prediction, an n-step reconstruction,
and a one-step-ahead forecast.

Training minimises

    gamma/2 * (t_prev - r)^2 + gamma/2 * (t_next - f)^2
        + (1 - gamma) * mean_j (t_j - y_j)^2

averaged over the mini-batch, with Adam.  Everything is float64 and
deterministic for a fixed seed; the recurrence runs on the compiled kernel
backend when available.
"""

from __future__ import annotations

import base64
import contextlib
import json
from dataclasses import dataclass, field

import numpy as np

try:
    from threadpoolctl import threadpool_limits
except ImportError:  # pragma: no cover
    def threadpool_limits(limits=None):
        return contextlib.nullcontext()

from . import _kernels as kern
from .errors import (
    CheckpointError,
    DimensionError,
    InsufficientDataError,
    TrainingDivergedError,
)
from .signal import WindowSet

__all__ = [
    "AerConfig",
    "AerModel",
    "ModelOutput",
    "init_model",
    "aer_forward",
    "aer_loss",
    "train",
    "predict_all",
    "predict_outputs",
    "gradient_check",
    "model_to_dict",
    "model_from_dict",
]

DEFAULT_EPOCHS = 12


@dataclass(frozen=True)
class AerConfig:
    """Model and optimizer settings."""

    n: int = 100
    gamma: float = 0.5
    hidden_units: int = 30
    epochs: int = DEFAULT_EPOCHS
    batch_size: int = 64
    learning_rate: float = 3e-3
    clip_norm: float | None = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.n < 2:
            raise ValueError(f"window size must be >= 2, got {self.n}")
        if self.hidden_units < 1:
            raise ValueError(f"hidden_units must be >= 1, got {self.hidden_units}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive or None")


@dataclass(eq=False)
class AerModel:
    """Parameter container; ``params`` maps names to float64 arrays."""

    n: int
    d: int
    hidden_units: int
    params: dict = field(repr=False)

    @property
    def output_length(self) -> int:
        return self.n + 2


@dataclass(frozen=True)
class ModelOutput:
    """Decoder output of one window, split by position.

    For a window starting at index i the reverse prediction aligns to
    i-1, the reconstruction to [i, i+n-1] and the forward prediction
    to i+n.
    """

    reverse_pred: float
    reconstruction: np.ndarray
    forward_pred: float
    start_index: int


def _param_shapes(n: int, d: int, b: int) -> dict:
    g = 4 * b
    return {
        "enc_f_w": (d, g),
        "enc_f_u": (b, g),
        "enc_f_b": (g,),
        "enc_b_w": (d, g),
        "enc_b_u": (b, g),
        "enc_b_b": (g,),
        "dec_f_w": (2 * b, g),
        "dec_f_u": (b, g),
        "dec_f_b": (g,),
        "dec_b_w": (2 * b, g),
        "dec_b_u": (b, g),
        "dec_b_b": (g,),
        "head_w": (2 * b,),
        "head_b": (),
    }


def _orthogonal(b: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.normal(size=(b, b))
    q, r = np.linalg.qr(a)
    return q * np.sign(np.diag(r))


def init_model(n: int, d: int, hidden_units: int, rng: np.random.Generator) -> AerModel:
    """Fresh seeded model.

    Input and head weights are fan-in-scaled uniform; recurrent matrices
    are per-gate orthogonal and the forget-gate bias starts at 1 (both
    standard for trainability of recurrent cells).
    """
    b = hidden_units
    params = {}
    for name, shape in _param_shapes(n, d, hidden_units).items():
        if name.endswith("_b"):
            arr = np.zeros(shape)
            if arr.ndim == 1:
                arr[b : 2 * b] = 1.0
            params[name] = arr
        elif name.endswith("_u"):
            params[name] = np.concatenate([_orthogonal(b, rng) for _ in range(4)], axis=1)
        else:
            fan_in = shape[0] if len(shape) > 1 else shape[0]
            bound = 1.0 / np.sqrt(fan_in)
            params[name] = rng.uniform(-bound, bound, size=shape)
    return AerModel(n=n, d=d, hidden_units=hidden_units, params=params)


def _forward(model: AerModel, X: np.ndarray, *, want_cache: bool = False):
    """Batched forward pass.

    X: (B, n, d).  Returns outputs (B, n+2) and, when requested, the
    intermediate activations needed for backprop.
    """
    p = model.params
    B, n, d = X.shape
    H = model.hidden_units
    S = n + 2

    Xt = np.ascontiguousarray(X.transpose(1, 0, 2))  # time-major (n, B, d)
    Xr = np.ascontiguousarray(Xt[::-1])

    if d == 1:
        xp_ef = Xt * p["enc_f_w"][0] + p["enc_f_b"]
        xp_eb = Xr * p["enc_b_w"][0] + p["enc_b_b"]
    else:
        xp_ef = (Xt.reshape(n * B, d) @ p["enc_f_w"] + p["enc_f_b"]).reshape(n, B, 4 * H)
        xp_eb = (Xr.reshape(n * B, d) @ p["enc_b_w"] + p["enc_b_b"]).reshape(n, B, 4 * H)
    ef = kern.lstm_forward(xp_ef, p["enc_f_u"])
    eb = kern.lstm_forward(xp_eb, p["enc_b_u"])
    z = np.concatenate([ef[0][n - 1], eb[0][n - 1]], axis=1)  # (B, 2H)

    # the decoder consumes the same projected latent at every step
    xp_df = (z @ p["dec_f_w"] + p["dec_f_b"])[None]
    xp_db = (z @ p["dec_b_w"] + p["dec_b_b"])[None]
    df = kern.lstm_forward(xp_df, p["dec_f_u"], steps=S)
    db = kern.lstm_forward(xp_db, p["dec_b_u"], steps=S)

    # backward decoder direction processes output positions S-1 .. 0
    hcat = np.concatenate([df[0], db[0][::-1]], axis=2)  # (S, B, 2H)
    out = (hcat.reshape(S * B, 2 * H) @ p["head_w"] + p["head_b"]).reshape(S, B).T

    if not want_cache:
        return out, None
    cache = {
        "Xt": Xt, "Xr": Xr, "ef": ef, "eb": eb, "z": z,
        "df": df, "db": db, "hcat": hcat,
    }
    return out, cache


def _backward(model: AerModel, cache: dict, dout: np.ndarray) -> dict:
    """Gradients of a scalar loss given d(loss)/d(outputs), dout (B, S)."""
    p = model.params
    H = model.hidden_units
    B, S = dout.shape
    n = S - 2

    hcat = cache["hcat"]
    dout_t = dout.T  # (S, B)
    grads = {}
    grads["head_w"] = np.einsum("sbk,sb->k", hcat, dout_t)
    grads["head_b"] = dout_t.sum()
    dhcat = dout_t[:, :, None] * p["head_w"]  # (S, B, 2H)

    ddf_h = np.ascontiguousarray(dhcat[:, :, :H])
    ddb_h = np.ascontiguousarray(dhcat[::-1, :, H:])

    df, db, z = cache["df"], cache["db"], cache["z"]
    # the same projection feeds every decoder step, so only its summed
    # gradient is needed
    dproj_f, grads["dec_f_u"] = kern.lstm_backward(
        p["dec_f_u"], df[2], df[1], df[3], df[0], ddf_h, True)
    dproj_b, grads["dec_b_u"] = kern.lstm_backward(
        p["dec_b_u"], db[2], db[1], db[3], db[0], ddb_h, True)

    grads["dec_f_w"] = z.T @ dproj_f
    grads["dec_f_b"] = dproj_f.sum(axis=0)
    grads["dec_b_w"] = z.T @ dproj_b
    grads["dec_b_b"] = dproj_b.sum(axis=0)
    dz = dproj_f @ p["dec_f_w"].T + dproj_b @ p["dec_b_w"].T  # (B, 2H)

    ef, eb = cache["ef"], cache["eb"]
    dh_ef = np.zeros_like(ef[0])
    dh_ef[n - 1] = dz[:, :H]
    dh_eb = np.zeros_like(eb[0])
    dh_eb[n - 1] = dz[:, H:]
    Xt, Xr = cache["Xt"], cache["Xr"]
    grads["enc_f_w"], grads["enc_f_b"], grads["enc_f_u"] = kern.lstm_backward_fused(
        p["enc_f_u"], ef[2], ef[1], ef[3], ef[0], dh_ef, Xt)
    grads["enc_b_w"], grads["enc_b_b"], grads["enc_b_u"] = kern.lstm_backward_fused(
        p["enc_b_u"], eb[2], eb[1], eb[3], eb[0], dh_eb, Xr)
    return grads


def _batch_loss(out: np.ndarray, tp: np.ndarray, tm: np.ndarray, tn: np.ndarray,
                gamma: float) -> tuple[float, np.ndarray]:
    """Mean loss over the batch and its gradient w.r.t. the outputs."""
    B, S = out.shape
    n = S - 2
    r = out[:, 0]
    y = out[:, 1 : n + 1]
    f = out[:, n + 1]
    pred = 0.5 * ((tp - r) ** 2 + (tn - f) ** 2)
    rec = np.mean((tm - y) ** 2, axis=1)
    loss = float(np.mean(gamma * pred + (1.0 - gamma) * rec))
    dout = np.empty_like(out)
    dout[:, 0] = gamma * (r - tp) / B
    dout[:, n + 1] = gamma * (f - tn) / B
    dout[:, 1 : n + 1] = 2.0 * (1.0 - gamma) * (y - tm) / (n * B)
    return loss, dout


def loss_and_grads(model: AerModel, X: np.ndarray, tp, tm, tn, gamma: float):
    """Batch loss plus parameter gradients (used by training and checks)."""
    out, cache = _forward(model, X, want_cache=True)
    loss, dout = _batch_loss(out, tp, tm, tn, gamma)
    grads = _backward(model, cache, dout)
    return loss, grads


def aer_forward(model: AerModel, window: np.ndarray, start_index: int = 0) -> ModelOutput:
    """Forward pass of a single (n, d) window."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim == 1:
        window = window[:, None]
    if window.shape != (model.n, model.d):
        raise DimensionError(
            f"window shape {window.shape} does not match model ({model.n}, {model.d})"
        )
    out, _ = _forward(model, window[None])
    row = out[0]
    return ModelOutput(
        reverse_pred=float(row[0]),
        reconstruction=row[1 : model.n + 1].copy(),
        forward_pred=float(row[model.n + 1]),
        start_index=start_index,
    )


def aer_loss(truth: tuple, output: ModelOutput, gamma: float) -> float:
    """Joint loss of one window given (t_prev, t_window, t_next)."""
    t_prev, t_mid, t_next = truth
    t_mid = np.asarray(t_mid, dtype=np.float64)
    pred = 0.5 * (t_prev - output.reverse_pred) ** 2 + 0.5 * (t_next - output.forward_pred) ** 2
    rec = float(np.mean((t_mid - output.reconstruction) ** 2))
    return gamma * pred + (1.0 - gamma) * rec


def train(windows: WindowSet, config: AerConfig) -> tuple[AerModel, list]:
    """Mini-batch Adam on the joint loss; returns per-epoch mean losses.

    Only windows with both boundary targets present are trained on.
    Deterministic for a fixed seed (given a fixed BLAS thread count).
    """
    if windows.window_size != config.n:
        raise DimensionError(
            f"WindowSet was built with n={windows.window_size}, config has n={config.n}"
        )
    mask = windows.trainable_mask()
    n_train = int(mask.sum())
    if n_train < 1:
        raise InsufficientDataError("no window has both boundary targets")

    X = windows.windows[mask]
    tp = windows.prev_targets[mask]
    tm = windows.window_targets[mask]
    tn = windows.next_targets[mask]

    rng = np.random.default_rng(config.rng_seed)
    model = init_model(config.n, windows.n_channels, config.hidden_units, rng)

    m_state = {k: np.zeros_like(v) for k, v in model.params.items()}
    v_state = {k: np.zeros_like(v) for k, v in model.params.items()}
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0

    history = []
    # the per-step matrix products are too small to gain from BLAS threads;
    # one thread is faster and keeps runs reproducible across machines
    with threadpool_limits(limits=1):
        for epoch in range(config.epochs):
            # half-cosine decay to a tenth of the base rate: the late epochs
            # run cool enough for the loss to settle instead of oscillating
            if config.epochs > 1:
                frac = 0.5 * (1.0 + np.cos(np.pi * epoch / (config.epochs - 1)))
            else:
                frac = 1.0
            lr_epoch = config.learning_rate * (0.1 + 0.9 * frac)
            order = rng.permutation(n_train)
            total = 0.0
            for lo in range(0, n_train, config.batch_size):
                idx = order[lo : lo + config.batch_size]
                loss, grads = loss_and_grads(model, X[idx], tp[idx], tm[idx], tn[idx], config.gamma)
                if not np.isfinite(loss):
                    raise TrainingDivergedError(epoch, loss)
                total += loss * len(idx)
                if config.clip_norm is not None:
                    gnorm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
                    if gnorm > config.clip_norm:
                        scale = config.clip_norm / gnorm
                        grads = {k: g * scale for k, g in grads.items()}
                step += 1
                lr_t = lr_epoch * np.sqrt(1 - beta2**step) / (1 - beta1**step)
                for k, g in grads.items():
                    m_state[k] += (1 - beta1) * (g - m_state[k])
                    v_state[k] += (1 - beta2) * (g * g - v_state[k])
                    model.params[k] -= lr_t * m_state[k] / (np.sqrt(v_state[k]) + eps)
            history.append(total / n_train)
    return model, history


def predict_outputs(model: AerModel, windows: WindowSet, chunk: int = 256) -> np.ndarray:
    """Raw decoder outputs for every window, shape (K, n+2)."""
    if windows.window_size != model.n or windows.n_channels != model.d:
        raise DimensionError(
            f"windows (n={windows.window_size}, d={windows.n_channels}) do not match "
            f"model (n={model.n}, d={model.d})"
        )
    K = len(windows)
    out = np.empty((K, model.n + 2))
    with threadpool_limits(limits=1):
        for lo in range(0, K, chunk):
            hi = min(lo + chunk, K)
            out[lo:hi], _ = _forward(model, windows.windows[lo:hi])
    return out


def predict_all(model: AerModel, windows: WindowSet) -> list:
    """Map the forward pass over every window, preserving order."""
    if len(windows) == 0:
        return []
    raw = predict_outputs(model, windows)
    n = model.n
    return [
        ModelOutput(
            reverse_pred=float(raw[k, 0]),
            reconstruction=raw[k, 1 : n + 1].copy(),
            forward_pred=float(raw[k, n + 1]),
            start_index=int(windows.start_indices[k]),
        )
        for k in range(len(windows))
    ]


def gradient_check(model: AerModel, window: np.ndarray, truth: tuple, gamma: float,
                   epsilon: float = 1e-5, n_coords: int = 60, rng_seed: int = 0) -> float:
    """Max relative error of analytic vs central-difference gradients.

    Checks ``n_coords`` randomly chosen parameter coordinates (at least 50).
    """
    if not 1e-6 <= epsilon <= 1e-3:
        raise ValueError(f"epsilon must be in [1e-6, 1e-3], got {epsilon}")
    n_coords = max(n_coords, 50)
    window = np.asarray(window, dtype=np.float64)
    if window.ndim == 1:
        window = window[:, None]
    X = window[None]
    t_prev, t_mid, t_next = truth
    tp = np.array([t_prev], dtype=np.float64)
    tm = np.asarray(t_mid, dtype=np.float64)[None, :]
    tn = np.array([t_next], dtype=np.float64)

    _, grads = loss_and_grads(model, X, tp, tm, tn, gamma)

    names = sorted(model.params)
    sizes = [model.params[k].size for k in names]
    total = int(np.sum(sizes))
    rng = np.random.default_rng(rng_seed)
    coords = rng.choice(total, size=min(n_coords, total), replace=False)

    def loss_at(params):
        probe = AerModel(n=model.n, d=model.d, hidden_units=model.hidden_units, params=params)
        out, _ = _forward(probe, X)
        loss, _ = _batch_loss(out, tp, tm, tn, gamma)
        return loss

    bounds = np.cumsum([0] + sizes)
    worst = 0.0
    for flat in coords:
        which = int(np.searchsorted(bounds, flat, side="right")) - 1
        name = names[which]
        local = int(flat - bounds[which])
        base = model.params[name].reshape(-1)[local]

        plus = {k: v.copy() for k, v in model.params.items()}
        plus[name].reshape(-1)[local] = base + epsilon
        minus = {k: v.copy() for k, v in model.params.items()}
        minus[name].reshape(-1)[local] = base - epsilon
        numeric = (loss_at(plus) - loss_at(minus)) / (2.0 * epsilon)
        analytic = grads[name].reshape(-1)[local] if grads[name].ndim else float(grads[name])
        rel = abs(analytic - numeric) / max(1e-6, abs(analytic), abs(numeric))
        worst = max(worst, rel)
    return worst


def model_to_dict(model: AerModel) -> dict:
    """Self-describing, exactly round-tripping representation."""
    arrays = {}
    for name, arr in model.params.items():
        arrays[name] = {
            "shape": list(arr.shape),
            "dtype": "float64",
            "data": base64.b64encode(np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode("ascii"),
        }
    return {
        "n": model.n,
        "d": model.d,
        "hidden_units": model.hidden_units,
        "arrays": arrays,
    }


def model_from_dict(payload: dict) -> AerModel:
    try:
        n = int(payload["n"])
        d = int(payload["d"])
        b = int(payload["hidden_units"])
        arrays = payload["arrays"]
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"malformed model payload: missing {exc}") from exc
    expected = _param_shapes(n, d, b)
    params = {}
    for name, shape in expected.items():
        if name not in arrays:
            raise CheckpointError(f"checkpoint is missing parameter {name!r}")
        entry = arrays[name]
        raw = base64.b64decode(entry["data"])
        arr = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(entry["shape"])
        if tuple(arr.shape) != shape:
            raise CheckpointError(
                f"parameter {name!r} has shape {arr.shape}, expected {shape}"
            )
        params[name] = arr.copy()
    return AerModel(n=n, d=d, hidden_units=b, params=params)


def save_checkpoint(model: AerModel, path, extra: dict | None = None) -> None:
    """Write a JSON checkpoint; ``extra`` is merged in for provenance."""
    payload = {"format": "aer-checkpoint/1", "model": model_to_dict(model)}
    if extra:
        payload.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path) -> tuple[AerModel, dict]:
    """Read a checkpoint; returns the model and the full payload."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if payload.get("format") != "aer-checkpoint/1":
        raise CheckpointError(f"{path} is not an aer checkpoint")
    return model_from_dict(payload.get("model", {})), payload
