"""Pure-numpy recurrence kernels (reference backend).

Both backends share one contract. Inputs are float64 C-contiguous arrays;
``xp`` holds precomputed input preactivations ``W x_t + b`` for every step,
so the kernel only runs the sequential recurrence.

LSTM gate layout along the 4H axis: [i, f, g, o]
    i, f, o = sigmoid(.), g = tanh(.)
    c_t = f * c_{t-1} + i * g
    h_t = o * tanh(c_t)

GRU gate layout along the 3H axis: [z, r, n]
    z, r = sigmoid(.), n = tanh(xp_n + r * (U h_{t-1})_n)
    h_t = z * h_{t-1} + (1 - z) * n        (z = carry gate: z -> 1 keeps h)
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def lstm_forward(xp, h0, c0, U):
    """Run an LSTM over xp (T, 4H); returns (h_seq, c_seq, gates, tanh_c)."""
    T, G = xp.shape
    H = G // 4
    h_seq = np.empty((T, H))
    c_seq = np.empty((T, H))
    gates = np.empty((T, G))
    tanh_c = np.empty((T, H))
    h, c = h0, c0
    for t in range(T):
        a = xp[t] + U @ h
        i = _sigmoid(a[:H])
        f = _sigmoid(a[H:2 * H])
        g = np.tanh(a[2 * H:3 * H])
        o = _sigmoid(a[3 * H:])
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        gates[t, :H] = i
        gates[t, H:2 * H] = f
        gates[t, 2 * H:3 * H] = g
        gates[t, 3 * H:] = o
        c_seq[t] = c
        tanh_c[t] = tc
        h_seq[t] = h
    return h_seq, c_seq, gates, tanh_c


def lstm_backward(dh_out, dc_last, U, h0, c0, h_seq, c_seq, gates, tanh_c):
    """Reverse-mode pass; dh_out (T, H) are upstream grads on every h_t.

    Returns (dxp, dU, dh0, dc0).
    """
    T, H = dh_out.shape
    G = 4 * H
    dxp = np.empty((T, G))
    dU = np.zeros_like(U)
    dh = np.zeros(H)
    dc = dc_last.copy()
    for t in range(T - 1, -1, -1):
        i = gates[t, :H]
        f = gates[t, H:2 * H]
        g = gates[t, 2 * H:3 * H]
        o = gates[t, 3 * H:]
        tc = tanh_c[t]
        h_prev = h_seq[t - 1] if t > 0 else h0
        c_prev = c_seq[t - 1] if t > 0 else c0
        dh_t = dh_out[t] + dh
        do = dh_t * tc
        dc = dc + dh_t * o * (1.0 - tc * tc)
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        da = dxp[t]
        da[:H] = di * i * (1.0 - i)
        da[H:2 * H] = df * f * (1.0 - f)
        da[2 * H:3 * H] = dg * (1.0 - g * g)
        da[3 * H:] = do * o * (1.0 - o)
        dU += np.outer(da, h_prev)
        dh = U.T @ da
        dc = dc * f
    return dxp, dU, dh, dc


def gru_forward(xp, h0, U):
    """Run a GRU over xp (T, 3H); returns (h_seq, gates, uh_n)."""
    T, G = xp.shape
    H = G // 3
    h_seq = np.empty((T, H))
    gates = np.empty((T, G))
    uh_n = np.empty((T, H))
    h = h0
    for t in range(T):
        uh = U @ h
        z = _sigmoid(xp[t, :H] + uh[:H])
        r = _sigmoid(xp[t, H:2 * H] + uh[H:2 * H])
        n = np.tanh(xp[t, 2 * H:] + r * uh[2 * H:])
        gates[t, :H] = z
        gates[t, H:2 * H] = r
        gates[t, 2 * H:] = n
        uh_n[t] = uh[2 * H:]
        h = z * h + (1.0 - z) * n
        h_seq[t] = h
    return h_seq, gates, uh_n


def gru_backward(dh_out, U, h0, h_seq, gates, uh_n):
    """Reverse-mode pass; returns (dxp, dU, dh0)."""
    T, H = dh_out.shape
    G = 3 * H
    dxp = np.empty((T, G))
    dU = np.zeros_like(U)
    duh = np.empty(G)
    dh = np.zeros(H)
    for t in range(T - 1, -1, -1):
        z = gates[t, :H]
        r = gates[t, H:2 * H]
        n = gates[t, 2 * H:]
        h_prev = h_seq[t - 1] if t > 0 else h0
        dh_t = dh_out[t] + dh
        dz = dh_t * (h_prev - n)
        dn = dh_t * (1.0 - z)
        dan = dn * (1.0 - n * n)
        dr = dan * uh_n[t]
        daz = dz * z * (1.0 - z)
        dar = dr * r * (1.0 - r)
        dxp[t, :H] = daz
        dxp[t, H:2 * H] = dar
        dxp[t, 2 * H:] = dan
        duh[:H] = daz
        duh[H:2 * H] = dar
        duh[2 * H:] = dan * r
        dU += np.outer(duh, h_prev)
        dh = U.T @ duh + dh_t * z
    return dxp, dU, dh
