"""Independent reference implementations used as test oracles.

Everything here is written with plain loops and ``math`` so it shares no
code path with the package it checks.
"""

import math
from collections import defaultdict


def logistic(x):
    return 1.0 / (1.0 + math.exp(-x))


def matvec(M, v):
    return [sum(M[r][c] * v[c] for c in range(len(v))) for r in range(len(M))]


def lstm_cell(x, h, c, w):
    def gate(g, act):
        wx = matvec(w[f"W_{g}"], x)
        uh = matvec(w[f"U_{g}"], h)
        return [act(wx[k] + uh[k] + w[f"b_{g}"][k]) for k in range(len(h))]

    i = gate("i", logistic)
    f = gate("f", logistic)
    o = gate("o", logistic)
    cand = gate("c", math.tanh)
    c_new = [f[k] * c[k] + i[k] * cand[k] for k in range(len(h))]
    h_new = [o[k] * math.tanh(c_new[k]) for k in range(len(h))]
    return h_new, c_new


def gru_cell(x, h, w):
    n = len(h)

    def pre(g, hv):
        wx = matvec(w[f"W_{g}"], x)
        uh = matvec(w[f"U_{g}"], hv)
        return [wx[k] + uh[k] + w[f"b_{g}"][k] for k in range(n)]

    z = [logistic(v) for v in pre("z", h)]
    r = [logistic(v) for v in pre("r", h)]
    cand = [math.tanh(v) for v in pre("h", [r[k] * h[k] for k in range(n)])]
    return [(1 - z[k]) * h[k] + z[k] * cand[k] for k in range(n)]


def conv1d_layer(x, W, b, relu=True):
    """``x[t][c]``, ``W[o][c][k]`` -> ``y[t][o]`` by direct summation."""
    T = len(x)
    O, C, K = len(W), len(W[0]), len(W[0][0])
    out = []
    for t in range(T - K + 1):
        row = []
        for o in range(O):
            s = b[o]
            for c in range(C):
                for k in range(K):
                    s += W[o][c][k] * x[t + k][c]
            row.append(max(s, 0.0) if relu else s)
        out.append(row)
    return out


def rnn_forecast(history, params, arch, hidden):
    """Run the cell over the whole history, then the dense head."""
    h = [0.0] * hidden
    c = [0.0] * hidden
    cell = {}
    for name, value in params.items():
        if name.startswith("rnn0."):
            cell[name.split(".", 1)[1]] = value
    for x in history:
        if arch == "FC_LSTM":
            h, c = lstm_cell([x], h, c, cell)
        else:
            h = gru_cell([x], h, cell)
    return [v + bb for v, bb in zip(matvec(params["head.W"], h), params["head.b"])]


# -- metrics -----------------------------------------------------------------


def metrics(actual, predicted):
    n = len(actual)
    sq = ab = bias = sm = 0.0
    for a, p in zip(actual, predicted):
        sq += (p - a) ** 2
        ab += abs(p - a)
        bias += p - a
        d = (abs(a) + abs(p)) / 2
        sm += abs(p - a) / d if d > 0 else 0.0
    mean = 0.0
    for a in actual:
        mean += a
    mean /= n
    tot = 0.0
    for a in actual:
        tot += (a - mean) ** 2
    return {
        "rmse": math.sqrt(sq / n),
        "mae": ab / n,
        "mbd": bias / n,
        "smape": 100.0 * sm / n,
        "r_squared": 1.0 - sq / tot if tot > 0 else float("nan"),
    }


# -- aggregation -------------------------------------------------------------


def aggregate(records, bucket):
    """Per-device bucket means, forward-filled, summed across devices."""
    start = math.floor(min(r.timestamp for r in records))
    buckets = defaultdict(lambda: defaultdict(list))
    for r in records:
        k = int(math.floor((r.timestamp - start) / bucket))
        buckets[(r.node_id, r.gpu_index)][k].append(r.power)
    n = 1 + max(int(math.floor((r.timestamp - start) / bucket)) for r in records)
    total = [0.0] * n
    for dev, per_bucket in buckets.items():
        last = 0.0
        for k in range(n):
            if k in per_bucket:
                vals = per_bucket[k]
                last = sum(vals) / len(vals)
            total[k] += last
    return start, total


# -- finite differences -------------------------------------------------------


def finite_difference(loss_fn, params, step=1e-5):
    """Central differences of ``loss_fn()`` with respect to every entry of every array in ``params``."""
    import numpy as np

    grads = {}
    for name, arr in params.items():
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + step
            up = loss_fn()
            arr[idx] = orig - step
            down = loss_fn()
            arr[idx] = orig
            g[idx] = (up - down) / (2 * step)
        grads[name] = g
    return grads


def max_relative_error(analytic, numeric, floor=1e-7):
    """Largest entrywise ``|a - n| / max(|a|, |n|, floor)`` over all tensors."""
    import numpy as np

    worst = 0.0
    for name in numeric:
        a, n = analytic[name], numeric[name]
        err = np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(err.max()))
    return worst


def gradient_check(arch, seed, hidden=6, H=10, P=3, batch=3, step=1e-5):
    """Max relative error of analytic vs central-difference gradients for one random model."""
    import numpy as np

    from gpuforecast.nncore import ModelSpec, init_weights, loss_and_grads

    spec = ModelSpec(arch, lookback=H, horizon=P, hidden_size=hidden, channels=(hidden, hidden), kernel_widths=(3, 3))
    weights = init_weights(spec, seed)
    rng = np.random.default_rng([seed, 99])
    for p in weights.params.values():
        if p.ndim == 1:  # non-zero biases so their paths are exercised
            p += rng.normal(0.0, 0.1, p.shape)
    X = rng.uniform(0.0, 1.0, (batch, H))
    Y = rng.uniform(0.0, 1.0, (batch, P))
    _, analytic = loss_and_grads(weights, X, Y)
    numeric = finite_difference(lambda: loss_and_grads(weights, X, Y)[0], weights.params, step)
    return max_relative_error(analytic, numeric)
