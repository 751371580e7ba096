"""Forecasting models mapping a lookback window to a horizon vector.

Three architectures share one parameter container and a dense head:

* ``FC_LSTM`` / ``GRU``: recurrent encoder over the history, final hidden
  state fed to the head.
* ``CNN1D``: stacked valid conv + ReLU layers, flattened time-major, then
  the head.

Parameters live in an ordered ``dict[str, ndarray]`` so optimizers,
clipping and checkpoints can treat every model the same way.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import layers

ARCHITECTURES = ("FC_LSTM", "GRU", "CNN1D")


@dataclass(frozen=True)
class ModelSpec:
    """Architecture hyperparameters. ``lookback`` only affects CNN1D head size."""

    arch: str
    lookback: int
    horizon: int
    hidden_size: int = 64
    layers: int = 1
    channels: tuple[int, ...] = (32, 32)
    kernel_widths: tuple[int, ...] = (5, 5)
    input_size: int = 1

    def __post_init__(self):
        if self.arch not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.arch!r}; expected one of {ARCHITECTURES}")
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        object.__setattr__(self, "kernel_widths", tuple(int(k) for k in self.kernel_widths))
        if self.lookback < 1 or self.horizon < 1 or self.input_size < 1:
            raise ValueError("lookback, horizon and input_size must be positive")
        if self.arch == "CNN1D":
            if len(self.channels) != len(self.kernel_widths) or not self.channels:
                raise ValueError("channels and kernel_widths must be non-empty and the same length")
            if any(k < 1 or k % 2 == 0 for k in self.kernel_widths):
                raise ValueError(f"kernel widths must be odd, got {self.kernel_widths}")
            if any(c < 1 for c in self.channels):
                raise ValueError("channel counts must be positive")
            if self.conv_output_length < 1:
                raise ValueError("kernels are wider than the lookback window")
        elif self.hidden_size < 1 or self.layers < 1:
            raise ValueError("hidden_size and layers must be positive")

    @property
    def conv_output_length(self) -> int:
        return self.lookback - sum(k - 1 for k in self.kernel_widths)

    @property
    def feature_size(self) -> int:
        if self.arch == "CNN1D":
            return self.conv_output_length * self.channels[-1]
        return self.hidden_size

    def to_dict(self) -> dict:
        d = asdict(self)
        d["channels"] = list(self.channels)
        d["kernel_widths"] = list(self.kernel_widths)
        return d

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        """Parameter names and shapes in canonical (initialization and file) order."""
        shapes: dict[str, tuple[int, ...]] = {}
        if self.arch == "CNN1D":
            c_in = self.input_size
            for l, (c_out, k) in enumerate(zip(self.channels, self.kernel_widths)):
                shapes[f"conv{l}.W"] = (c_out, c_in, k)
                shapes[f"conv{l}.b"] = (c_out,)
                c_in = c_out
        else:
            gates = layers.LSTM_GATES if self.arch == "FC_LSTM" else layers.GRU_GATES
            d_in = self.input_size
            n = self.hidden_size
            for l in range(self.layers):
                for g in gates:
                    shapes[f"rnn{l}.W_{g}"] = (n, d_in)
                    shapes[f"rnn{l}.U_{g}"] = (n, n)
                    shapes[f"rnn{l}.b_{g}"] = (n,)
                d_in = n
        shapes["head.W"] = (self.horizon, self.feature_size)
        shapes["head.b"] = (self.horizon,)
        return shapes


@dataclass
class ModelWeights:
    spec: ModelSpec
    params: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        shapes = self.spec.param_shapes()
        if list(self.params) != list(shapes):
            missing = set(shapes) ^ set(self.params)
            raise ValueError(f"parameter set does not match {self.spec.arch}: {sorted(missing)}")
        for name, shape in shapes.items():
            arr = np.asarray(self.params[name], dtype=np.float64)
            if arr.shape != shape:
                raise ValueError(f"{name}: expected shape {shape}, got {arr.shape}")
            self.params[name] = arr

    @property
    def arch(self) -> str:
        return self.spec.arch

    def copy(self) -> "ModelWeights":
        return ModelWeights(self.spec, {k: v.copy() for k, v in self.params.items()})

    def num_parameters(self) -> int:
        return sum(v.size for v in self.params.values())


def init_weights(spec: ModelSpec, seed: int) -> ModelWeights:
    """Glorot-uniform matrices, zero biases (LSTM forget-gate bias 1).

    Tensors are drawn in :meth:`ModelSpec.param_shapes` order from a single
    ``numpy.random.default_rng(seed)`` stream.
    """
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in spec.param_shapes().items():
        if len(shape) == 1:
            params[name] = np.zeros(shape)
            if spec.arch == "FC_LSTM" and name.endswith(".b_f"):
                params[name][:] = 1.0
            continue
        if len(shape) == 3:  # conv (out, in, width)
            fan_in, fan_out = shape[1] * shape[2], shape[0] * shape[2]
        else:
            fan_out, fan_in = shape
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        params[name] = rng.uniform(-bound, bound, size=shape)
    return ModelWeights(spec, params)


def _stack(params, prefix, gates, kind):
    return np.concatenate([params[f"{prefix}.{kind}_{g}"] for g in gates], axis=0)


def forward_batch(weights: ModelWeights, X):
    """Predict for a batch of histories ``X`` (B, H). Returns ``(Y_hat (B, P), cache)``."""
    spec, p = weights.spec, weights.params
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or (spec.arch == "CNN1D" and X.shape[1] != spec.lookback):
        raise ValueError(f"expected histories of shape (B, {spec.lookback}), got {X.shape}")
    seq = X[:, :, None]
    caches = []
    if spec.arch == "CNN1D":
        for l in range(len(spec.channels)):
            seq, c = layers.conv_forward(seq, p[f"conv{l}.W"], p[f"conv{l}.b"])
            caches.append(c)
        feat = seq.reshape(seq.shape[0], -1)
    else:
        run = layers.lstm_forward if spec.arch == "FC_LSTM" else layers.gru_forward
        gates = layers.LSTM_GATES if spec.arch == "FC_LSTM" else layers.GRU_GATES
        for l in range(spec.layers):
            pre = f"rnn{l}"
            seq, c = run(seq, _stack(p, pre, gates, "W"), _stack(p, pre, gates, "U"), _stack(p, pre, gates, "b"))
            caches.append(c)
        feat = seq[:, -1]
    Y = feat @ p["head.W"].T + p["head.b"]
    return Y, (caches, seq.shape, feat)


def backward_batch(weights: ModelWeights, cache, dY) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss given ``dY`` = dL/dY_hat (B, P)."""
    spec, p = weights.spec, weights.params
    caches, seq_shape, feat = cache
    grads = {}
    grads["head.W"] = dY.T @ feat
    grads["head.b"] = dY.sum(axis=0)
    dfeat = dY @ p["head.W"]
    if spec.arch == "CNN1D":
        dseq = dfeat.reshape(seq_shape)
        for l in range(len(spec.channels) - 1, -1, -1):
            dseq, grads[f"conv{l}.W"], grads[f"conv{l}.b"] = layers.conv_backward(dseq, caches[l])
    else:
        back = layers.lstm_backward if spec.arch == "FC_LSTM" else layers.gru_backward
        gates = layers.LSTM_GATES if spec.arch == "FC_LSTM" else layers.GRU_GATES
        n = spec.hidden_size
        dseq = np.zeros(seq_shape)
        dseq[:, -1] = dfeat
        for l in range(spec.layers - 1, -1, -1):
            dseq, dW, dU, db = back(dseq, caches[l])
            for j, g in enumerate(gates):
                rows = slice(j * n, (j + 1) * n)
                grads[f"rnn{l}.W_{g}"] = dW[rows]
                grads[f"rnn{l}.U_{g}"] = dU[rows]
                grads[f"rnn{l}.b_{g}"] = db[rows]
    return {name: grads[name] for name in p}


def mse_loss(prediction, target) -> float:
    """Mean squared error over every horizon step (and batch row, if 2-D)."""
    prediction = np.asarray(prediction, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if prediction.shape != target.shape:
        raise ValueError(f"length mismatch: prediction {prediction.shape} vs target {target.shape}")
    if prediction.size == 0:
        raise ValueError("empty prediction")
    diff = prediction - target
    return float(np.mean(diff * diff))


def loss_and_grads(weights: ModelWeights, X, Y):
    """Batch-mean MSE and its gradient for every parameter."""
    Y = np.asarray(Y, dtype=np.float64)
    Y_hat, cache = forward_batch(weights, X)
    if Y.shape != Y_hat.shape:
        raise ValueError(f"target shape {Y.shape} does not match prediction {Y_hat.shape}")
    diff = Y_hat - Y
    loss = float(np.mean(diff * diff))
    dY = (2.0 / diff.size) * diff
    return loss, backward_batch(weights, cache, dY)


def forward(history, weights: ModelWeights) -> np.ndarray:
    """Forecast one window: ``history`` (H,) -> (P,)."""
    history = np.asarray(history, dtype=np.float64)
    if history.ndim != 1:
        raise ValueError("history must be one-dimensional")
    return forward_batch(weights, history[None])[0][0]


def backward(history, weights: ModelWeights, target) -> dict[str, np.ndarray]:
    """Gradient of the single-window MSE loss with respect to every parameter."""
    target = np.asarray(target, dtype=np.float64)
    history = np.asarray(history, dtype=np.float64)
    return loss_and_grads(weights, history[None], target[None])[1]


INFERENCE_BLOCK = 64


def predict(weights: ModelWeights, X) -> np.ndarray:
    """Forecast many windows ``X`` (N, H) -> (N, P).

    Windows run in zero-padded blocks of exactly ``INFERENCE_BLOCK`` rows.
    BLAS picks different kernels for different row counts, so a fixed block
    shape is what makes a window's forecast bitwise independent of which
    other windows share its batch.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D array of histories, got shape {X.shape}")
    n = X.shape[0]
    out = np.empty((n, weights.spec.horizon))
    block = np.zeros((INFERENCE_BLOCK, X.shape[1]))
    for s in range(0, n, INFERENCE_BLOCK):
        m = min(INFERENCE_BLOCK, n - s)
        block[:m] = X[s : s + m]
        block[m:] = 0.0
        out[s : s + m] = forward_batch(weights, block)[0][:m]
    return out
