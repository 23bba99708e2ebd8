"""Pure-NumPy reference implementations of the hot kernels.

These mirror the compiled versions in ``_native`` exactly: same gate layout,
same accumulation order.  They are the fallback when the extension is not
built and the ground truth the native module is tested against.

Conventions shared by both backends:

* sequence arrays are time-major: (S, B, ...) with step 0 first;
* LSTM gate layout is [i, f, o, g] so the three sigmoid gates form one
  contiguous block (sigmoid(x) is evaluated as 0.5 + 0.5*tanh(x/2));
* the initial hidden and cell states are zero.
"""

from __future__ import annotations

import numpy as np

BACKEND = "reference"


def lstm_forward(xp: np.ndarray, u: np.ndarray, steps: int | None = None):
    """Run an LSTM over precomputed input projections.

    xp: (S, B, 4H) input projections x_t @ W + b, gate layout [i, f, o, g].
        A (1, B, 4H) array with ``steps`` set runs a constant-input
        recurrence (repeated-vector decoding) without materialising the
        repeats.
    u:  (H, 4H) recurrent weights.

    Returns (h, c, gates, tanh_c): hidden states (S, B, H), cell states,
    activated gates (S, B, 4H) and tanh of the cell states — everything the
    backward pass needs.
    """
    S_xp, B, G = xp.shape
    S = S_xp if steps is None else steps
    if S_xp not in (S, 1):
        raise ValueError(f"xp has {S_xp} steps, expected {S} or 1")
    H = G // 4
    h = np.empty((S, B, H))
    c = np.empty((S, B, H))
    tc = np.empty((S, B, H))
    gates = np.empty((S, B, G))
    h_prev = np.zeros((B, H))
    c_prev = np.zeros((B, H))
    for t in range(S):
        p = xp[t if S_xp > 1 else 0] + h_prev @ u
        p[:, : 3 * H] *= 0.5
        tt = np.tanh(p)
        act = gates[t]
        act[:, : 3 * H] = 0.5 + 0.5 * tt[:, : 3 * H]
        act[:, 3 * H :] = tt[:, 3 * H :]
        i = act[:, 0:H]
        f = act[:, H : 2 * H]
        g = act[:, 3 * H :]
        c[t] = f * c_prev + i * g
        tc[t] = np.tanh(c[t])
        h[t] = act[:, 2 * H : 3 * H] * tc[t]
        h_prev = h[t]
        c_prev = c[t]
    return h, c, gates, tc


def lstm_backward(u, gates, c, tanh_c, h, dh_out, sum_dxp: bool = False):
    """Backpropagate through :func:`lstm_forward`.

    dh_out: (S, B, H) upstream gradients on every hidden state.
    Returns (dxp, du): gradients on the input projections and on ``u``.
    With ``sum_dxp`` the per-step input-projection gradients are summed
    over time into a (B, 4H) array (all a constant-input recurrence needs).
    """
    S, B, H = dh_out.shape
    du = np.zeros_like(u)
    dxp = np.zeros((1, B, 4 * H)) if sum_dxp else np.empty((S, B, 4 * H))
    dh_rec = np.zeros((B, H))
    dc_rec = np.zeros((B, H))
    for t in range(S - 1, -1, -1):
        i = gates[t][:, 0:H]
        f = gates[t][:, H : 2 * H]
        o = gates[t][:, 2 * H : 3 * H]
        g = gates[t][:, 3 * H :]
        tc = tanh_c[t]
        c_prev = c[t - 1] if t > 0 else np.zeros((B, H))
        dh = dh_out[t] + dh_rec
        do = dh * tc
        dc = dc_rec + dh * o * (1.0 - tc * tc)
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dp = np.empty((B, 4 * H)) if sum_dxp else dxp[t]
        dp[:, 0:H] = di * i * (1.0 - i)
        dp[:, H : 2 * H] = df * f * (1.0 - f)
        dp[:, 2 * H : 3 * H] = do * o * (1.0 - o)
        dp[:, 3 * H :] = dg * (1.0 - g * g)
        if sum_dxp:
            dxp[0] += dp
        if t > 0:
            du += h[t - 1].T @ dp
        dh_rec = dp @ u.T
        dc_rec = dc * f
    return (dxp[0] if sum_dxp else dxp), du


def lstm_backward_fused(u, gates, c, tanh_c, h, dh_out, x):
    """Backward pass that contracts input-projection gradients on the fly.

    x: (S, B, d) inputs that produced the projections (xp = x @ w + b).
    Returns (dw, db, du) with dw = sum_t x_t^T dp_t and db = sum dp_t —
    the full per-step dxp array is never materialised.
    """
    S, B, H = dh_out.shape
    G = 4 * H
    d = x.shape[2]
    du = np.zeros_like(u)
    dw = np.zeros((d, G))
    db = np.zeros(G)
    dh_rec = np.zeros((B, H))
    dc_rec = np.zeros((B, H))
    dp = np.empty((B, G))
    for t in range(S - 1, -1, -1):
        i = gates[t][:, 0:H]
        f = gates[t][:, H : 2 * H]
        o = gates[t][:, 2 * H : 3 * H]
        g = gates[t][:, 3 * H :]
        tc = tanh_c[t]
        c_prev = c[t - 1] if t > 0 else np.zeros((B, H))
        dh = dh_out[t] + dh_rec
        do = dh * tc
        dc = dc_rec + dh * o * (1.0 - tc * tc)
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dp[:, 0:H] = di * i * (1.0 - i)
        dp[:, H : 2 * H] = df * f * (1.0 - f)
        dp[:, 2 * H : 3 * H] = do * o * (1.0 - o)
        dp[:, 3 * H :] = dg * (1.0 - g * g)
        dw += x[t].T @ dp
        db += dp.sum(axis=0)
        if t > 0:
            du += h[t - 1].T @ dp
        dh_rec = dp @ u.T
        dc_rec = dc * f
    return dw, db, du


def _dtw_pair(a: np.ndarray, b: np.ndarray) -> float:
    """Minimum-cost monotone alignment of two equal-length windows.

    Cost is the squared pointwise difference; the returned score is
    sqrt(total cost along the optimal path) divided by the path length.
    Tie-breaks prefer diagonal, then the (p-1, q) predecessor.
    """
    m = a.shape[0]
    D = np.empty((m, m))
    Q = np.empty((m, m), dtype=np.int64)
    for p in range(m):
        for q in range(m):
            d = a[p] - b[q]
            cost = d * d
            if p == 0 and q == 0:
                D[0, 0] = cost
                Q[0, 0] = 1
            elif p == 0:
                D[0, q] = cost + D[0, q - 1]
                Q[0, q] = Q[0, q - 1] + 1
            elif q == 0:
                D[p, 0] = cost + D[p - 1, 0]
                Q[p, 0] = Q[p - 1, 0] + 1
            else:
                bd = D[p - 1, q - 1]
                bq = Q[p - 1, q - 1]
                if D[p - 1, q] < bd:
                    bd = D[p - 1, q]
                    bq = Q[p - 1, q]
                if D[p, q - 1] < bd:
                    bd = D[p, q - 1]
                    bq = Q[p, q - 1]
                D[p, q] = cost + bd
                Q[p, q] = bq + 1
    return float(np.sqrt(D[m - 1, m - 1]) / Q[m - 1, m - 1])


def dtw_window_scores(x: np.ndarray, y: np.ndarray, l: int) -> np.ndarray:
    """Per-index DTW discrepancy on length-2l windows centred at each index.

    The window for index i is [i-l, i+l), truncated at the series edges.
    """
    T = x.shape[0]
    out = np.empty(T)
    for i in range(T):
        lo = max(0, i - l)
        hi = min(T, i + l)
        out[i] = _dtw_pair(x[lo:hi], y[lo:hi])
    return out
