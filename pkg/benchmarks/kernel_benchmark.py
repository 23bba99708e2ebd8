#!/usr/bin/env python3
"""Compare the compiled kernels against the pure-NumPy fallback.

Runs the LSTM sequence recurrence (forward + backward) and the windowed
DTW scorer on training-shaped inputs through both backends, checks they
agree, and prints a timing table.

Usage: python benchmarks/kernel_benchmark.py [--repeats N]
"""

import argparse
import os
import time

os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")

import numpy as np  # noqa: E402

from aer._kernels import _reference  # noqa: E402

try:
    from aer._kernels import _native
except ImportError:
    _native = None


def timeit(fn, repeats):
    fn()  # warm-up
    t0 = time.perf_counter()
    for _ in range(repeats):
        out = fn()
    return (time.perf_counter() - t0) / repeats, out


def bench_lstm(backend, rng, S, B, H, repeats):
    xp = rng.normal(size=(S, B, 4 * H)) * 0.3
    u = rng.normal(size=(H, 4 * H)) * 0.18
    t_fwd, (h, c, g, tc) = timeit(lambda: backend.lstm_forward(xp, u), repeats)
    dh = rng.normal(size=(S, B, H))
    t_bwd, _ = timeit(lambda: backend.lstm_backward(u, g, c, tc, h, dh), repeats)
    return t_fwd, t_bwd


def bench_dtw(backend, rng, T, l, repeats):
    x = rng.normal(size=T)
    y = rng.normal(size=T)
    t, _ = timeit(lambda: backend.dtw_window_scores(x, y, l), repeats)
    return t


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if _native is None:
        raise SystemExit("native extension not built; run pip install -e . first")

    rng = np.random.default_rng(0)
    rows = []

    for S, B, H in [(102, 64, 30), (34, 64, 10)]:
        label = f"lstm fwd+bwd S={S} B={B} H={H}"
        nf, nb = bench_lstm(_native, rng, S, B, H, args.repeats)
        rf, rb = bench_lstm(_reference, rng, S, B, H, args.repeats)
        rows.append((label, (nf + nb) * 1e3, (rf + rb) * 1e3))

    for T, l in [(2000, 10), (10000, 10)]:
        label = f"dtw scores T={T} l={l}"
        nt = bench_dtw(_native, rng, T, l, args.repeats)
        rt = bench_dtw(_reference, rng, T, l, max(1, args.repeats // 5))
        rows.append((label, nt * 1e3, rt * 1e3))

    # agreement spot check
    x = rng.normal(size=500)
    y = rng.normal(size=500)
    assert np.array_equal(_native.dtw_window_scores(x, y, 10),
                          _reference.dtw_window_scores(x, y, 10))

    print(f"{'kernel':<34} {'native ms':>10} {'fallback ms':>12} {'speedup':>8}")
    print("-" * 68)
    for label, nt, rt in rows:
        print(f"{label:<34} {nt:>10.2f} {rt:>12.2f} {rt / nt:>7.1f}x")


if __name__ == "__main__":
    main()
