"""Mini-batch training with Adam, early stopping and JSON checkpoints."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .nncore import ModelSpec, ModelWeights, init_weights, loss_and_grads, mse_loss, predict
from .preprocess import ScalerParams, WindowedDataset

log = logging.getLogger(__name__)

CHECKPOINT_SCHEMA = 1

__all__ = [
    "AdamState",
    "CheckpointError",
    "TrainConfig",
    "TrainHistory",
    "TrainingDiverged",
    "adam_step",
    "clip_global_norm",
    "load_checkpoint",
    "mse_loss",
    "save_checkpoint",
    "sgd_step",
    "train",
]


class TrainingDiverged(RuntimeError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    arch: str = "FC_LSTM"
    hidden_size: int = 64
    layers: int = 1
    channels: tuple[int, ...] = (32, 32)
    kernel_widths: tuple[int, ...] = (5, 5)
    batch_size: int = 64
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_epochs: int = 100
    patience: int = 10
    clip_norm: Optional[float] = 5.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        object.__setattr__(self, "kernel_widths", tuple(int(k) for k in self.kernel_widths))
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.eps > 0):
            raise ValueError("Adam constants need 0 <= beta < 1 and eps > 0")
        if self.clip_norm is not None and not self.clip_norm > 0:
            raise ValueError("clip_norm must be positive or None")

    def model_spec(self, lookback: int, horizon: int) -> ModelSpec:
        return ModelSpec(
            self.arch,
            lookback=lookback,
            horizon=horizon,
            hidden_size=self.hidden_size,
            layers=self.layers,
            channels=self.channels,
            kernel_widths=self.kernel_widths,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["channels"] = list(self.channels)
        d["kernel_widths"] = list(self.kernel_widths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown training option(s): {', '.join(sorted(unknown))}")
        return cls(**d)


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = -1

    @property
    def epochs(self) -> int:
        return len(self.train_loss)

    def to_csv(self) -> str:
        rows = ["epoch,train_loss,val_loss"]
        rows += [f"{e + 1},{tl!r},{vl!r}" for e, (tl, vl) in enumerate(zip(self.train_loss, self.val_loss))]
        return "\n".join(rows) + "\n"


# -- optimizers --------------------------------------------------------------


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def zeros_like(cls, weights: ModelWeights) -> "AdamState":
        return cls(
            {k: np.zeros_like(p) for k, p in weights.params.items()},
            {k: np.zeros_like(p) for k, p in weights.params.items()},
        )


def adam_step(weights: ModelWeights, grads: dict, state: AdamState, config: TrainConfig = TrainConfig()):
    """Bias-corrected Adam update, in place. Returns ``(weights, state)``."""
    if set(grads) != set(weights.params) or set(state.m) != set(weights.params):
        raise ValueError("gradient/state keys do not match the model parameters")
    state.step += 1
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for name, p in weights.params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"{name}: gradient shape {g.shape} != parameter shape {p.shape}")
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.eps)
    return weights, state


def sgd_step(weights: ModelWeights, grads: dict, config: TrainConfig):
    for name, p in weights.params.items():
        p -= config.learning_rate * grads[name]
    return weights


def clip_global_norm(grads: dict, max_norm: float) -> float:
    """Scale ``grads`` in place so their joint L2 norm is at most ``max_norm``; returns the original norm."""
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


# -- training loop -----------------------------------------------------------


def evaluate_loss(weights: ModelWeights, data: WindowedDataset, idx) -> float:
    """Mean normalized MSE over the windows ``idx``."""
    pred = predict(weights, data.histories(idx))
    return mse_loss(pred, data.targets(idx))


def train(
    config: TrainConfig,
    data: WindowedDataset,
    on_epoch: Optional[Callable[[int, float, float], None]] = None,
) -> tuple[ModelWeights, TrainHistory]:
    """Fit a model on the train split, early-stopping on validation loss.

    Weights come from ``init_weights(spec, seed)``; per-epoch shuffles use a
    separate generator seeded with ``[seed, 1]``. Returns the weights of the
    best validation epoch.
    """
    train_idx, val_idx = data.indices("train"), data.indices("val")
    if len(train_idx) == 0 or len(val_idx) == 0 or len(data.indices("test")) == 0:
        raise ValueError("train, validation and test splits must all be non-empty")

    weights = init_weights(config.model_spec(data.H, data.P), config.seed)
    shuffle_rng = np.random.default_rng([config.seed, 1])
    adam = AdamState.zeros_like(weights)
    history = TrainHistory()
    best = weights.copy()
    best_val = math.inf
    stale = 0

    for epoch in range(config.max_epochs):
        order = train_idx[shuffle_rng.permutation(len(train_idx))]
        total = 0.0
        for s in range(0, len(order), config.batch_size):
            batch = np.sort(order[s : s + config.batch_size])
            loss, grads = loss_and_grads(weights, data.histories(batch), data.targets(batch))
            if not math.isfinite(loss):
                raise TrainingDiverged(f"non-finite training loss at epoch {epoch + 1}, batch {s // config.batch_size}")
            total += loss * len(batch)
            if config.clip_norm is not None:
                clip_global_norm(grads, config.clip_norm)
            if config.optimizer == "adam":
                adam_step(weights, grads, adam, config)
            else:
                sgd_step(weights, grads, config)
        train_loss = total / len(order)
        val_loss = evaluate_loss(weights, data, val_idx)
        if not math.isfinite(val_loss):
            raise TrainingDiverged(f"non-finite validation loss at epoch {epoch + 1}")
        history.train_loss.append(train_loss)
        history.val_loss.append(val_loss)
        log.info("epoch %d  train %.6g  val %.6g", epoch + 1, train_loss, val_loss)
        if on_epoch is not None:
            on_epoch(epoch, train_loss, val_loss)

        if val_loss < best_val:
            best_val = val_loss
            best = weights.copy()
            history.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                log.info("early stop after epoch %d (best %d)", epoch + 1, history.best_epoch + 1)
                break
    return best, history


# -- checkpoints -------------------------------------------------------------


def checkpoint_document(weights: ModelWeights, scaler: ScalerParams, config: Optional[TrainConfig] = None) -> dict:
    return {
        "schema_version": CHECKPOINT_SCHEMA,
        "architecture": weights.arch,
        "hyperparameters": weights.spec.to_dict(),
        "scaler": {"min": scaler.min, "max": scaler.max},
        "train_config": None if config is None else config.to_dict(),
        "weights": {name: p.tolist() for name, p in weights.params.items()},
    }


def save_checkpoint(weights: ModelWeights, scaler: ScalerParams, config: Optional[TrainConfig], path) -> None:
    # json writes floats with repr(), the shortest string that round-trips exactly
    text = json.dumps(checkpoint_document(weights, scaler, config), separators=(",", ":"))
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_checkpoint(path) -> tuple[ModelWeights, ScalerParams, Optional[TrainConfig]]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: not valid JSON ({exc})") from None
    if doc.get("schema_version") != CHECKPOINT_SCHEMA:
        raise CheckpointError(f"unsupported checkpoint schema version {doc.get('schema_version')!r}")
    try:
        hyper = dict(doc["hyperparameters"])
        if hyper.get("arch") != doc["architecture"]:
            raise CheckpointError("architecture tag disagrees with hyperparameters")
        spec = ModelSpec(**hyper)
        shapes = spec.param_shapes()
        raw = doc["weights"]
        if list(raw) != list(shapes):
            raise CheckpointError(f"weight tensors {sorted(raw)} do not match {spec.arch} layout")
        params = {}
        for name, shape in shapes.items():
            arr = np.array(raw[name], dtype=np.float64)
            if arr.shape != shape:
                raise CheckpointError(f"{name}: expected shape {shape}, file has {arr.shape}")
            params[name] = arr
        scaler = ScalerParams(float(doc["scaler"]["min"]), float(doc["scaler"]["max"]))
        cfg = doc.get("train_config")
        config = None if cfg is None else TrainConfig.from_dict(cfg)
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"{path}: malformed checkpoint ({exc!r})") from None
    except ValueError as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"{path}: {exc}") from None
    return ModelWeights(spec, params), scaler, config
