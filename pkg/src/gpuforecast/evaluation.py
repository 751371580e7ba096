"""Forecast accuracy metrics in watts and horizon-pooled model evaluation."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .nncore import ModelWeights, predict
from .preprocess import ScalerParams, WindowedDataset, unscale


class UndefinedMetricError(ValueError):
    pass


def _pair(actual, predicted):
    a = np.asarray(actual, dtype=np.float64).ravel()
    p = np.asarray(predicted, dtype=np.float64).ravel()
    if a.shape != p.shape:
        raise ValueError(f"length mismatch: {a.size} actual vs {p.size} predicted")
    if a.size == 0:
        raise ValueError("metrics need at least one sample")
    return a, p


def rmse(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    return math.sqrt(np.mean((p - a) ** 2))


def mae(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    return float(np.mean(np.abs(p - a)))


def mbd(actual, predicted) -> float:
    """Mean bias deviation; positive means the model over-predicts."""
    a, p = _pair(actual, predicted)
    return float(np.mean(p - a))


def smape(actual, predicted) -> float:
    """Symmetric MAPE in percent, half-sum denominator; 0/0 terms count as 0."""
    a, p = _pair(actual, predicted)
    denom = (np.abs(a) + np.abs(p)) / 2.0
    safe = np.where(denom > 0, denom, 1.0)
    terms = np.where(denom > 0, np.abs(p - a) / safe, 0.0)
    return float(100.0 * np.mean(terms))


def r_squared(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    if ss_tot == 0.0:
        raise UndefinedMetricError("R-squared is undefined for a constant actual series")
    return 1.0 - float(np.sum((a - p) ** 2)) / ss_tot


@dataclass(frozen=True)
class MetricsReport:
    rmse: float
    mae: float
    mbd: float
    smape: float
    r_squared: float
    n: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"


def compute_metrics(actual, predicted) -> MetricsReport:
    a, p = _pair(actual, predicted)
    return MetricsReport(rmse(a, p), mae(a, p), mbd(a, p), smape(a, p), r_squared(a, p), int(a.size))


@dataclass(frozen=True)
class ResidualSeries:
    """Final-horizon-step trace: one row per test window, keyed by target timestamp."""

    t_seconds: np.ndarray
    actual: np.ndarray
    predicted: np.ndarray

    @property
    def residual(self) -> np.ndarray:
        return self.predicted - self.actual

    def __len__(self) -> int:
        return len(self.t_seconds)

    def select(self, t_start: float, length: float) -> "ResidualSeries":
        keep = (self.t_seconds >= t_start) & (self.t_seconds < t_start + length)
        return ResidualSeries(self.t_seconds[keep], self.actual[keep], self.predicted[keep])

    def to_csv(self) -> str:
        rows = ["t_seconds,actual_w,predicted_w,residual_w"]
        for t, a, p, r in zip(self.t_seconds, self.actual, self.predicted, self.residual):
            rows.append(f"{float(t)!r},{float(a)!r},{float(p)!r},{float(r)!r}")
        return "\n".join(rows) + "\n"


@dataclass(frozen=True)
class Evaluation:
    metrics: MetricsReport
    residuals: ResidualSeries
    window_index: np.ndarray  # dataset window indices, in order
    actual: np.ndarray  # (windows, P) watts
    predicted: np.ndarray  # (windows, P) watts, unclamped


def predict_watts(weights: ModelWeights, scaler: ScalerParams, histories) -> np.ndarray:
    return unscale(predict(weights, histories), scaler)


def evaluate_model(
    weights: ModelWeights, scaler: ScalerParams, data: WindowedDataset, split: str = "test"
) -> Evaluation:
    """Score every (window, horizon step) pair of ``split`` in watts."""
    if weights.spec.horizon != data.P:
        raise ValueError(f"model horizon {weights.spec.horizon} does not match dataset P={data.P}")
    if weights.arch == "CNN1D" and weights.spec.lookback != data.H:
        raise ValueError(f"model lookback {weights.spec.lookback} does not match dataset H={data.H}")
    idx = data.indices(split)
    if len(idx) == 0:
        raise ValueError(f"split {split!r} is empty")
    predicted = predict_watts(weights, scaler, data.histories(idx))
    actual = unscale(data.targets(idx), scaler)
    metrics = compute_metrics(actual, predicted)
    last = idx + data.H + data.P - 1
    residuals = ResidualSeries(
        data.series.start_time + data.series.step * last, actual[:, -1].copy(), predicted[:, -1].copy()
    )
    return Evaluation(metrics, residuals, idx, actual, predicted)
