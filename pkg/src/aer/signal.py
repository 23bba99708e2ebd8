"""Time-series container, preprocessing transforms, and rolling windows.

All transforms are pure: they return new objects and the parameters needed
to invert them.  Missing samples are represented as NaN until imputation.
Indices are 0-based throughout the implementation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateInputError, InsufficientDataError, UnimputableChannelError

__all__ = [
    "Signal",
    "LabeledInterval",
    "WindowSet",
    "TrendParams",
    "ScaleParams",
    "detrend",
    "retrend",
    "scale_minmax",
    "unscale_minmax",
    "impute_mean",
    "make_windows",
]


@dataclass(frozen=True)
class Signal:
    """A multichannel series with a designated target channel.

    ``values`` has shape (T, d); NaN marks a missing sample.  ``timestamps``
    are strictly increasing integers (positional index or epoch seconds).
    """

    timestamps: np.ndarray
    values: np.ndarray
    target_channel: int = 0
    name: str = "signal"

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.ndim != 2:
            raise ValueError(f"values must be 1-D or 2-D, got shape {vals.shape}")
        if ts.ndim != 1 or ts.shape[0] != vals.shape[0]:
            raise ValueError(
                f"timestamps length {ts.shape} does not match values {vals.shape}"
            )
        if ts.shape[0] >= 2 and not np.all(np.diff(ts) > 0):
            raise ValueError("timestamps must be strictly increasing")
        if not 0 <= self.target_channel < vals.shape[1]:
            raise ValueError(
                f"target_channel {self.target_channel} out of range for d={vals.shape[1]}"
            )
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]

    @property
    def target(self) -> np.ndarray:
        """The target channel as a (T,) view."""
        return self.values[:, self.target_channel]


@dataclass(frozen=True, order=True)
class LabeledInterval:
    """Inclusive [start, end] interval, in index or timestamp units."""

    start: int
    end: int

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"interval start {self.start} > end {self.end}")

    def overlaps(self, other: "LabeledInterval") -> bool:
        return self.start <= other.end and other.start <= self.end


@dataclass(frozen=True)
class TrendParams:
    """Per-channel OLS line over the positional index."""

    slope: np.ndarray
    intercept: np.ndarray


@dataclass(frozen=True)
class ScaleParams:
    """Per-channel affine map onto [lo, hi]."""

    channel_min: np.ndarray
    channel_max: np.ndarray
    lo: float
    hi: float


@dataclass(frozen=True)
class WindowSet:
    """Overlapping length-n windows with aligned previous/next targets.

    Window k covers source indices [k, k+n-1]; there are T - n windows.
    ``prev_targets[k]`` is the target value at k-1 (NaN for the first
    window) and ``next_targets[k]`` the value at k+n.
    """

    windows: np.ndarray  # (K, n, d)
    start_indices: np.ndarray  # (K,)
    prev_targets: np.ndarray  # (K,) NaN where absent
    next_targets: np.ndarray  # (K,) NaN where absent
    window_size: int
    series_length: int
    target_channel: int = 0

    def __len__(self) -> int:
        return self.windows.shape[0]

    @property
    def n_channels(self) -> int:
        return self.windows.shape[2]

    @property
    def window_targets(self) -> np.ndarray:
        """Target-channel slice of every window, shape (K, n)."""
        return self.windows[:, :, self.target_channel]

    def trainable_mask(self) -> np.ndarray:
        """Windows usable for training: both boundary targets present."""
        return np.isfinite(self.prev_targets) & np.isfinite(self.next_targets)


def detrend(signal: Signal) -> tuple[Signal, TrendParams]:
    """Subtract the per-channel least-squares line over the index.

    Missing samples are ignored by the fit and stay missing.  Raises
    DegenerateInputError when fewer than two observations are available.
    """
    T, d = signal.values.shape
    if T < 2:
        raise DegenerateInputError(f"detrend needs T >= 2, got T={T}")
    idx = np.arange(T, dtype=np.float64)
    slope = np.empty(d)
    intercept = np.empty(d)
    residual = signal.values.copy()
    for c in range(d):
        col = signal.values[:, c]
        ok = np.isfinite(col)
        if ok.sum() < 2:
            raise DegenerateInputError(
                f"channel {c} has {int(ok.sum())} finite samples, need >= 2"
            )
        x = idx[ok]
        y = col[ok]
        xm = x.mean()
        ym = y.mean()
        den = np.sum((x - xm) ** 2)
        s = np.sum((x - xm) * (y - ym)) / den if den > 0 else 0.0
        b = ym - s * xm
        slope[c] = s
        intercept[c] = b
        residual[ok, c] = y - (s * x + b)
    out = replace(signal, values=residual)
    return out, TrendParams(slope=slope, intercept=intercept)


def retrend(signal: Signal, params: TrendParams) -> Signal:
    """Add a previously removed trend back."""
    idx = np.arange(signal.length, dtype=np.float64)
    restored = signal.values + (idx[:, None] * params.slope + params.intercept)
    return replace(signal, values=restored)


def scale_minmax(signal: Signal, lo: float = -1.0, hi: float = 1.0) -> tuple[Signal, ScaleParams]:
    """Map each channel affinely so its min/max land on lo/hi.

    Constant channels map every sample to the range midpoint.  NaN samples
    pass through untouched.
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    cmin = np.nanmin(signal.values, axis=0)
    cmax = np.nanmax(signal.values, axis=0)
    span = cmax - cmin
    scaled = np.empty_like(signal.values)
    for c in range(signal.n_channels):
        col = signal.values[:, c]
        if span[c] == 0:
            scaled[:, c] = np.where(np.isfinite(col), (lo + hi) / 2.0, col)
        else:
            scaled[:, c] = (col - cmin[c]) / span[c] * (hi - lo) + lo
    out = replace(signal, values=scaled)
    return out, ScaleParams(channel_min=cmin, channel_max=cmax, lo=lo, hi=hi)


def unscale_minmax(signal: Signal, params: ScaleParams) -> Signal:
    """Invert scale_minmax using the stored parameters."""
    lo, hi = params.lo, params.hi
    span = params.channel_max - params.channel_min
    restored = np.empty_like(signal.values)
    for c in range(signal.n_channels):
        col = signal.values[:, c]
        if span[c] == 0:
            restored[:, c] = np.where(np.isfinite(col), params.channel_min[c], col)
        else:
            restored[:, c] = (col - lo) / (hi - lo) * span[c] + params.channel_min[c]
    return replace(signal, values=restored)


def impute_mean(signal: Signal) -> Signal:
    """Replace every missing sample by the channel mean of present ones."""
    values = signal.values
    if not np.isnan(values).any():
        return signal
    filled = values.copy()
    for c in range(signal.n_channels):
        col = filled[:, c]
        miss = np.isnan(col)
        if not miss.any():
            continue
        if miss.all():
            raise UnimputableChannelError(f"channel {c} has no finite samples")
        col[miss] = col[~miss].mean()
    return replace(signal, values=filled)


def make_windows(signal: Signal, n: int) -> WindowSet:
    """Cut the series into T - n rolling windows of length n, step 1."""
    T = signal.length
    if n < 1:
        raise ValueError(f"window size must be positive, got {n}")
    if T <= n:
        raise InsufficientDataError(f"need T > n, got T={T}, n={n}")
    K = T - n
    starts = np.arange(K)
    # stride trick view, then copy so the WindowSet owns its data
    windows = np.lib.stride_tricks.sliding_window_view(signal.values, n, axis=0)
    windows = np.ascontiguousarray(windows[:K].transpose(0, 2, 1))
    target = signal.target
    prev = np.full(K, np.nan)
    prev[1:] = target[: K - 1]
    nxt = target[n : n + K].astype(np.float64).copy()
    return WindowSet(
        windows=windows,
        start_indices=starts,
        prev_targets=prev,
        next_targets=nxt,
        window_size=n,
        series_length=T,
        target_channel=signal.target_channel,
    )
