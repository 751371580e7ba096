"""Recurrent and convolutional layers with hand-written reverse passes.

Sequences are laid out ``(batch, time, features)``. Each ``*_forward``
returns the layer output plus a cache consumed by the matching
``*_backward``, which returns parameter gradients and the gradient with
respect to the layer input. Batch/time reductions are plain matmuls over
flattened ``(batch * time)`` rows, so summation order is fixed for a given
shape and results are reproducible run to run.
"""

from __future__ import annotations

import numpy as np

LSTM_GATES = ("i", "f", "o", "c")
GRU_GATES = ("z", "r", "h")


def sigmoid(x):
    # tanh form: no overflow for large |x| and no masked indexing in the hot loop
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _check_cell(x, h_prev, W, U, b):
    hidden = h_prev.shape[-1]
    if W.shape != (hidden, x.shape[-1]) or U.shape != (hidden, hidden) or b.shape != (hidden,):
        raise ValueError(
            f"shape mismatch: x {x.shape}, h {h_prev.shape}, W {W.shape}, U {U.shape}, b {b.shape}"
        )


# -- single-step cells -------------------------------------------------------


def lstm_cell_forward(x_t, h_prev, c_prev, w: dict):
    """One LSTM step. ``w`` maps ``W_g``, ``U_g``, ``b_g`` for g in i, f, o, c."""
    x_t, h_prev, c_prev = (np.asarray(a, dtype=np.float64) for a in (x_t, h_prev, c_prev))
    if c_prev.shape != h_prev.shape:
        raise ValueError(f"cell state {c_prev.shape} does not match hidden state {h_prev.shape}")
    pre = {}
    for g in LSTM_GATES:
        W, U, b = w[f"W_{g}"], w[f"U_{g}"], w[f"b_{g}"]
        _check_cell(x_t, h_prev, W, U, b)
        pre[g] = W @ x_t + U @ h_prev + b
    i, f, o = sigmoid(pre["i"]), sigmoid(pre["f"]), sigmoid(pre["o"])
    c_t = f * c_prev + i * np.tanh(pre["c"])
    return o * np.tanh(c_t), c_t


def gru_cell_forward(x_t, h_prev, w: dict):
    """One GRU step; ``h = (1 - z) * h_prev + z * candidate``."""
    x_t, h_prev = np.asarray(x_t, dtype=np.float64), np.asarray(h_prev, dtype=np.float64)
    for g in GRU_GATES:
        _check_cell(x_t, h_prev, w[f"W_{g}"], w[f"U_{g}"], w[f"b_{g}"])
    z = sigmoid(w["W_z"] @ x_t + w["U_z"] @ h_prev + w["b_z"])
    r = sigmoid(w["W_r"] @ x_t + w["U_r"] @ h_prev + w["b_r"])
    cand = np.tanh(w["W_h"] @ x_t + w["U_h"] @ (r * h_prev) + w["b_h"])
    return (1.0 - z) * h_prev + z * cand


def conv1d_forward(x, kernels, biases):
    """Stacked valid cross-correlation + ReLU for one sequence.

    ``x`` is ``(length, in_channels)`` (a 1-D array means one channel);
    ``kernels[l]`` is ``(out, in, width)``. Returns ``(length', out)``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    for W, b in zip(kernels, biases):
        x, _ = conv_forward(x[None], W, b)
        x = x[0]
    return x


# -- batched sequence layers ------------------------------------------------


def lstm_forward(xs, W, U, b):
    """Run an LSTM over ``xs`` (B, T, D) from zero state.

    ``W`` (4h, D), ``U`` (4h, h) and ``b`` (4h,) stack the gates in the
    order i, f, o, c. Returns hidden states (B, T, h).
    """
    B, T, _ = xs.shape
    n = U.shape[1]
    if W.shape != (4 * n, xs.shape[2]) or U.shape != (4 * n, n) or b.shape != (4 * n,):
        raise ValueError(f"shape mismatch: xs {xs.shape}, W {W.shape}, U {U.shape}, b {b.shape}")
    xw = xs @ W.T + b
    gates = np.empty((B, T, 4 * n))
    cs = np.empty((B, T + 1, n))
    hs = np.empty((B, T + 1, n))
    cs[:, 0] = 0.0
    hs[:, 0] = 0.0
    Ut = U.T
    for t in range(T):
        a = xw[:, t] + hs[:, t] @ Ut
        g = gates[:, t]
        g[:, : 3 * n] = sigmoid(a[:, : 3 * n])
        g[:, 3 * n :] = np.tanh(a[:, 3 * n :])
        cs[:, t + 1] = g[:, n : 2 * n] * cs[:, t] + g[:, :n] * g[:, 3 * n :]
        hs[:, t + 1] = g[:, 2 * n : 3 * n] * np.tanh(cs[:, t + 1])
    return hs[:, 1:], (xs, W, U, gates, cs, hs)


def lstm_backward(dhs, cache):
    """Reverse pass for :func:`lstm_forward`; ``dhs`` is dL/dh for every step."""
    xs, W, U, gates, cs, hs = cache
    B, T, D = xs.shape
    n = U.shape[1]
    da_all = np.empty((B, T, 4 * n))
    dh_next = np.zeros((B, n))
    dc_next = np.zeros((B, n))
    for t in range(T - 1, -1, -1):
        g = gates[:, t]
        i, f, o, cand = g[:, :n], g[:, n : 2 * n], g[:, 2 * n : 3 * n], g[:, 3 * n :]
        tc = np.tanh(cs[:, t + 1])
        dh = dhs[:, t] + dh_next
        dc = dh * o * (1.0 - tc * tc) + dc_next
        da = da_all[:, t]
        da[:, :n] = dc * cand * i * (1.0 - i)
        da[:, n : 2 * n] = dc * cs[:, t] * f * (1.0 - f)
        da[:, 2 * n : 3 * n] = dh * tc * o * (1.0 - o)
        da[:, 3 * n :] = dc * i * (1.0 - cand * cand)
        dc_next = dc * f
        dh_next = da @ U
    flat = da_all.reshape(B * T, 4 * n)
    dW = flat.T @ xs.reshape(B * T, D)
    dU = flat.T @ hs[:, :T].reshape(B * T, n)
    db = flat.sum(axis=0)
    dxs = da_all @ W
    return dxs, dW, dU, db


def gru_forward(xs, W, U, b):
    """Run a GRU over ``xs`` (B, T, D) from zero state; gates stacked z, r, h."""
    B, T, _ = xs.shape
    n = U.shape[1]
    if W.shape != (3 * n, xs.shape[2]) or U.shape != (3 * n, n) or b.shape != (3 * n,):
        raise ValueError(f"shape mismatch: xs {xs.shape}, W {W.shape}, U {U.shape}, b {b.shape}")
    xw = xs @ W.T + b
    Uzr_t = U[: 2 * n].T
    Uh_t = U[2 * n :].T
    gates = np.empty((B, T, 3 * n))
    rh = np.empty((B, T, n))
    hs = np.empty((B, T + 1, n))
    hs[:, 0] = 0.0
    for t in range(T):
        h = hs[:, t]
        g = gates[:, t]
        g[:, : 2 * n] = sigmoid(xw[:, t, : 2 * n] + h @ Uzr_t)
        rh[:, t] = g[:, n : 2 * n] * h
        g[:, 2 * n :] = np.tanh(xw[:, t, 2 * n :] + rh[:, t] @ Uh_t)
        z = g[:, :n]
        hs[:, t + 1] = h + z * (g[:, 2 * n :] - h)
    return hs[:, 1:], (xs, W, U, gates, rh, hs)


def gru_backward(dhs, cache):
    xs, W, U, gates, rh, hs = cache
    B, T, D = xs.shape
    n = U.shape[1]
    Uzr, Uh = U[: 2 * n], U[2 * n :]
    da_all = np.empty((B, T, 3 * n))
    dh_next = np.zeros((B, n))
    for t in range(T - 1, -1, -1):
        g = gates[:, t]
        z, r, cand = g[:, :n], g[:, n : 2 * n], g[:, 2 * n :]
        h_prev = hs[:, t]
        dh = dhs[:, t] + dh_next
        da = da_all[:, t]
        da[:, 2 * n :] = dh * z * (1.0 - cand * cand)
        drh = da[:, 2 * n :] @ Uh
        da[:, :n] = dh * (cand - h_prev) * z * (1.0 - z)
        da[:, n : 2 * n] = drh * h_prev * r * (1.0 - r)
        dh_next = dh * (1.0 - z) + drh * r + da[:, : 2 * n] @ Uzr
    flat = da_all.reshape(B * T, 3 * n)
    dW = flat.T @ xs.reshape(B * T, D)
    dU = np.empty_like(U)
    dU[: 2 * n] = flat[:, : 2 * n].T @ hs[:, :T].reshape(B * T, n)
    dU[2 * n :] = flat[:, 2 * n :].T @ rh.reshape(B * T, n)
    db = flat.sum(axis=0)
    dxs = da_all @ W
    return dxs, dW, dU, db


def conv_forward(x, W, b):
    """Valid cross-correlation + ReLU. ``x`` (B, T, C), ``W`` (O, C, K) -> (B, T-K+1, O)."""
    B, T, C = x.shape
    O, C_w, K = W.shape
    if C_w != C or b.shape != (O,):
        raise ValueError(f"shape mismatch: x {x.shape}, W {W.shape}, b {b.shape}")
    if K > T:
        raise ValueError(f"kernel width {K} exceeds sequence length {T}")
    L = T - K + 1
    # (B, L, C, K) -> rows of C*K taps, matching W's (C, K) flattening
    cols = np.lib.stride_tricks.sliding_window_view(x, K, axis=1).reshape(B, L, C * K)
    pre = cols @ W.reshape(O, C * K).T + b
    return np.maximum(pre, 0.0), (x.shape, W, cols, pre)


def conv_backward(dout, cache):
    x_shape, W, cols, pre = cache
    B, T, C = x_shape
    O, _, K = W.shape
    L = T - K + 1
    dpre = np.where(pre > 0.0, dout, 0.0).reshape(B * L, O)
    dW = (dpre.T @ cols.reshape(B * L, C * K)).reshape(O, C, K)
    db = dpre.sum(axis=0)
    dx = np.zeros(x_shape)
    for k in range(K):
        dx[:, k : k + L] += (dpre @ np.ascontiguousarray(W[:, :, k])).reshape(B, L, C)
    return dx, dW, db
