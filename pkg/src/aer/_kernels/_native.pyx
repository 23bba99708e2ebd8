# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels: LSTM sequence recurrence and windowed DTW scores.

Same contracts as ``_reference`` (see that module for the layout notes).
BLAS handles the per-step matrix products; the gate nonlinearity goes
through numpy's vectorised tanh, everything else is plain C loops.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt
from libc.string cimport memcpy
from scipy.linalg.cython_blas cimport dgemm

BACKEND = "native"


cdef inline void _gemm_rowmajor(char ta, char tb, int m, int n, int k,
                                double alpha, double* a, int lda,
                                double* b, int ldb,
                                double beta, double* c, int ldc) noexcept nogil:
    # Row-major C(m,n) = alpha * op(A) @ op(B) + beta * C via the
    # column-major identity C^T = op(B)^T op(A)^T.
    cdef char fa = b'T' if ta == b'T' else b'N'
    cdef char fb = b'T' if tb == b'T' else b'N'
    dgemm(&fb, &fa, &n, &m, &k, &alpha, b, &ldb, a, &lda, &beta, c, &ldc)


def lstm_forward(cnp.ndarray xp_arr, cnp.ndarray u_arr, steps=None):
    """See ``_reference.lstm_forward``."""
    cdef double[:, :, ::1] xp = xp_arr
    cdef double[:, ::1] u = u_arr
    cdef Py_ssize_t S_xp = xp.shape[0], B = xp.shape[1], G = xp.shape[2]
    cdef Py_ssize_t S = S_xp if steps is None else <Py_ssize_t>steps
    if S_xp != S and S_xp != 1:
        raise ValueError(f"xp has {S_xp} steps, expected {S} or 1")
    cdef Py_ssize_t H = G // 4

    h_arr = np.empty((S, B, H))
    c_arr = np.empty((S, B, H))
    tc_arr = np.empty((S, B, H))
    gates_arr = np.empty((S, B, G))
    p_arr = np.empty((B, G))
    cdef double[:, :, ::1] h = h_arr
    cdef double[:, :, ::1] c = c_arr
    cdef double[:, :, ::1] tc = tc_arr
    cdef double[:, :, ::1] gates = gates_arr
    cdef double[:, ::1] p = p_arr

    cdef Py_ssize_t t, b, j
    cdef double iv, fv, ov, gv, cv, cp
    for t in range(S):
        memcpy(&p[0, 0], &xp[t if S_xp > 1 else 0, 0, 0], B * G * sizeof(double))
        if t > 0:
            _gemm_rowmajor(b'N', b'N', <int>B, <int>G, <int>H, 1.0,
                           &h[t - 1, 0, 0], <int>H, &u[0, 0], <int>G,
                           1.0, &p[0, 0], <int>G)
        for b in range(B):
            for j in range(3 * H):
                p[b, j] *= 0.5
        np.tanh(p_arr, out=p_arr)
        for b in range(B):
            for j in range(H):
                iv = 0.5 + 0.5 * p[b, j]
                fv = 0.5 + 0.5 * p[b, H + j]
                ov = 0.5 + 0.5 * p[b, 2 * H + j]
                gv = p[b, 3 * H + j]
                gates[t, b, j] = iv
                gates[t, b, H + j] = fv
                gates[t, b, 2 * H + j] = ov
                gates[t, b, 3 * H + j] = gv
                cp = c[t - 1, b, j] if t > 0 else 0.0
                c[t, b, j] = fv * cp + iv * gv
        np.tanh(c_arr[t], out=tc_arr[t])
        for b in range(B):
            for j in range(H):
                h[t, b, j] = gates[t, b, 2 * H + j] * tc[t, b, j]
    return h_arr, c_arr, gates_arr, tc_arr


def lstm_backward(cnp.ndarray u_arr, cnp.ndarray gates_arr, cnp.ndarray c_arr,
                  cnp.ndarray tc_arr, cnp.ndarray h_arr, cnp.ndarray dh_out_arr,
                  bint sum_dxp=False):
    """See ``_reference.lstm_backward``."""
    cdef double[:, ::1] u = u_arr
    cdef double[:, :, ::1] gates = gates_arr
    cdef double[:, :, ::1] c = c_arr
    cdef double[:, :, ::1] tc = tc_arr
    cdef double[:, :, ::1] h = h_arr
    cdef double[:, :, ::1] dh_out = dh_out_arr
    cdef Py_ssize_t S = dh_out.shape[0], B = dh_out.shape[1], H = dh_out.shape[2]
    cdef Py_ssize_t G = 4 * H

    dxp_arr = np.zeros((1, B, G)) if sum_dxp else np.empty((S, B, G))
    dp_arr = np.empty((B, G)) if sum_dxp else None
    du_arr = np.zeros((H, G))
    dh_rec_arr = np.zeros((B, H))
    dc_rec_arr = np.zeros((B, H))
    cdef double[:, :, ::1] dxp = dxp_arr
    cdef double[:, ::1] dp = dp_arr if sum_dxp else dxp_arr[0]
    cdef double[:, ::1] du = du_arr
    cdef double[:, ::1] dh_rec = dh_rec_arr
    cdef double[:, ::1] dc_rec = dc_rec_arr

    cdef Py_ssize_t t, b, j
    cdef double iv, fv, ov, gv, tcv, cprev, dh, do, dc, di, dg, df
    for t in range(S - 1, -1, -1):
        if not sum_dxp:
            dp = dxp[t]
        for b in range(B):
            for j in range(H):
                iv = gates[t, b, j]
                fv = gates[t, b, H + j]
                ov = gates[t, b, 2 * H + j]
                gv = gates[t, b, 3 * H + j]
                tcv = tc[t, b, j]
                cprev = c[t - 1, b, j] if t > 0 else 0.0
                dh = dh_out[t, b, j] + dh_rec[b, j]
                do = dh * tcv
                dc = dc_rec[b, j] + dh * ov * (1.0 - tcv * tcv)
                di = dc * gv
                dg = dc * iv
                df = dc * cprev
                dp[b, j] = di * iv * (1.0 - iv)
                dp[b, H + j] = df * fv * (1.0 - fv)
                dp[b, 2 * H + j] = do * ov * (1.0 - ov)
                dp[b, 3 * H + j] = dg * (1.0 - gv * gv)
                dc_rec[b, j] = dc * fv
        if sum_dxp:
            for b in range(B):
                for j in range(G):
                    dxp[0, b, j] += dp[b, j]
        if t > 0:
            _gemm_rowmajor(b'T', b'N', <int>H, <int>G, <int>B, 1.0,
                           &h[t - 1, 0, 0], <int>H, &dp[0, 0], <int>G,
                           1.0, &du[0, 0], <int>G)
        _gemm_rowmajor(b'N', b'T', <int>B, <int>H, <int>G, 1.0,
                       &dp[0, 0], <int>G, &u[0, 0], <int>G,
                       0.0, &dh_rec[0, 0], <int>H)
    return (dxp_arr[0] if sum_dxp else dxp_arr), du_arr


def lstm_backward_fused(cnp.ndarray u_arr, cnp.ndarray gates_arr, cnp.ndarray c_arr,
                        cnp.ndarray tc_arr, cnp.ndarray h_arr, cnp.ndarray dh_out_arr,
                        cnp.ndarray x_arr):
    """See ``_reference.lstm_backward_fused``."""
    cdef double[:, ::1] u = u_arr
    cdef double[:, :, ::1] gates = gates_arr
    cdef double[:, :, ::1] c = c_arr
    cdef double[:, :, ::1] tc = tc_arr
    cdef double[:, :, ::1] h = h_arr
    cdef double[:, :, ::1] dh_out = dh_out_arr
    cdef double[:, :, ::1] x = x_arr
    cdef Py_ssize_t S = dh_out.shape[0], B = dh_out.shape[1], H = dh_out.shape[2]
    cdef Py_ssize_t G = 4 * H, d = x.shape[2]

    dp_arr = np.empty((B, G))
    du_arr = np.zeros((H, G))
    dw_arr = np.zeros((d, G))
    db_arr = np.zeros(G)
    dh_rec_arr = np.zeros((B, H))
    dc_rec_arr = np.zeros((B, H))
    cdef double[:, ::1] dp = dp_arr
    cdef double[:, ::1] du = du_arr
    cdef double[:, ::1] dw = dw_arr
    cdef double[::1] db = db_arr
    cdef double[:, ::1] dh_rec = dh_rec_arr
    cdef double[:, ::1] dc_rec = dc_rec_arr

    cdef Py_ssize_t t, b, j
    cdef double iv, fv, ov, gv, tcv, cprev, dh, do, dc, di, dg, df
    for t in range(S - 1, -1, -1):
        for b in range(B):
            for j in range(H):
                iv = gates[t, b, j]
                fv = gates[t, b, H + j]
                ov = gates[t, b, 2 * H + j]
                gv = gates[t, b, 3 * H + j]
                tcv = tc[t, b, j]
                cprev = c[t - 1, b, j] if t > 0 else 0.0
                dh = dh_out[t, b, j] + dh_rec[b, j]
                do = dh * tcv
                dc = dc_rec[b, j] + dh * ov * (1.0 - tcv * tcv)
                di = dc * gv
                dg = dc * iv
                df = dc * cprev
                dp[b, j] = di * iv * (1.0 - iv)
                dp[b, H + j] = df * fv * (1.0 - fv)
                dp[b, 2 * H + j] = do * ov * (1.0 - ov)
                dp[b, 3 * H + j] = dg * (1.0 - gv * gv)
                dc_rec[b, j] = dc * fv
        _gemm_rowmajor(b'T', b'N', <int>d, <int>G, <int>B, 1.0,
                       &x[t, 0, 0], <int>d, &dp[0, 0], <int>G,
                       1.0, &dw[0, 0], <int>G)
        for b in range(B):
            for j in range(G):
                db[j] += dp[b, j]
        if t > 0:
            _gemm_rowmajor(b'T', b'N', <int>H, <int>G, <int>B, 1.0,
                           &h[t - 1, 0, 0], <int>H, &dp[0, 0], <int>G,
                           1.0, &du[0, 0], <int>G)
        _gemm_rowmajor(b'N', b'T', <int>B, <int>H, <int>G, 1.0,
                       &dp[0, 0], <int>G, &u[0, 0], <int>G,
                       0.0, &dh_rec[0, 0], <int>H)
    return dw_arr, db_arr, du_arr


cdef double _dtw_pair(double* a, double* b, Py_ssize_t m,
                      double* D, long* Q) noexcept nogil:
    cdef Py_ssize_t p, q
    cdef double d, cost, bd
    cdef long bq
    for p in range(m):
        for q in range(m):
            d = a[p] - b[q]
            cost = d * d
            if p == 0 and q == 0:
                D[0] = cost
                Q[0] = 1
            elif p == 0:
                D[q] = cost + D[q - 1]
                Q[q] = Q[q - 1] + 1
            elif q == 0:
                D[p * m] = cost + D[(p - 1) * m]
                Q[p * m] = Q[(p - 1) * m] + 1
            else:
                bd = D[(p - 1) * m + q - 1]
                bq = Q[(p - 1) * m + q - 1]
                if D[(p - 1) * m + q] < bd:
                    bd = D[(p - 1) * m + q]
                    bq = Q[(p - 1) * m + q]
                if D[p * m + q - 1] < bd:
                    bd = D[p * m + q - 1]
                    bq = Q[p * m + q - 1]
                D[p * m + q] = cost + bd
                Q[p * m + q] = bq + 1
    return sqrt(D[m * m - 1]) / Q[m * m - 1]


def dtw_window_scores(cnp.ndarray x_arr, cnp.ndarray y_arr, int l):
    """See ``_reference.dtw_window_scores``."""
    cdef double[::1] x = np.ascontiguousarray(x_arr, dtype=np.float64)
    cdef double[::1] y = np.ascontiguousarray(y_arr, dtype=np.float64)
    cdef Py_ssize_t T = x.shape[0]
    out_arr = np.empty(T)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t side = 2 * l
    if side > T:
        side = T
    D_arr = np.empty(side * side)
    Q_arr = np.empty(side * side, dtype=np.int64)
    cdef double[::1] D = D_arr
    cdef long[::1] Q = Q_arr
    cdef Py_ssize_t i, lo, hi, m
    with nogil:
        for i in range(T):
            lo = i - l
            if lo < 0:
                lo = 0
            hi = i + l
            if hi > T:
                hi = T
            m = hi - lo
            out[i] = _dtw_pair(&x[lo], &y[lo], m, &D[0], &Q[0])
    return out_arr
