"""Min-max scaling, (history, horizon) windowing and chronological splitting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .ingest import TimeSeries

DEFAULT_LOOKBACK = 300
DEFAULT_HORIZON = 90
DEFAULT_RATIOS = (0.7, 0.15, 0.15)


class DegenerateScalerError(ValueError):
    pass


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class ScalerParams:
    min: float
    max: float

    def __post_init__(self):
        if not (math.isfinite(self.min) and math.isfinite(self.max)):
            raise DegenerateScalerError("scaler bounds must be finite")
        if not self.max > self.min:
            raise DegenerateScalerError(f"scaler needs max > min, got min={self.min} max={self.max}")

    @property
    def span(self) -> float:
        return self.max - self.min


def fit_minmax(ts: TimeSeries) -> ScalerParams:
    if len(ts) == 0:
        raise ValueError("cannot fit a scaler on an empty series")
    lo, hi = float(ts.values.min()), float(ts.values.max())
    if hi == lo:
        raise DegenerateScalerError(f"constant series (value {lo}) has zero range")
    return ScalerParams(lo, hi)


def scale(values, scaler: ScalerParams) -> np.ndarray:
    return (np.asarray(values, dtype=np.float64) - scaler.min) / scaler.span


def unscale(values, scaler: ScalerParams) -> np.ndarray:
    return np.asarray(values, dtype=np.float64) * scaler.span + scaler.min


def transform(ts: TimeSeries, scaler: ScalerParams) -> TimeSeries:
    # no clipping: test-split values outside the fitted range map outside [0, 1]
    return TimeSeries(ts.start_time, ts.step, scale(ts.values, scaler))


def inverse_transform(ts: TimeSeries, scaler: ScalerParams) -> TimeSeries:
    return TimeSeries(ts.start_time, ts.step, unscale(ts.values, scaler))


@dataclass(frozen=True)
class Window:
    history: np.ndarray
    target: np.ndarray
    origin_index: int


@dataclass(frozen=True)
class WindowedDataset:
    """Stride-1 windows over ``series``; window ``k`` starts at sample ``k``.

    Histories and targets are read-only views into the series, so building
    the dataset costs no copies. ``split`` holds ``(train_end, val_end)`` in
    window indices: train is ``[0, train_end)``, validation
    ``[train_end, val_end)`` and test ``[val_end, len)``.
    """

    series: TimeSeries
    H: int
    P: int
    split: Optional[tuple[int, int]] = None
    _frames: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.series) - self.H - self.P + 1
        frames = np.lib.stride_tricks.sliding_window_view(self.series.values, self.H + self.P)
        object.__setattr__(self, "_frames", frames[:n])
        if self.split is not None:
            train_end, val_end = self.split
            if not 0 <= train_end <= val_end <= n:
                raise ValueError(f"invalid split {self.split} for {n} windows")

    def __len__(self) -> int:
        return self._frames.shape[0]

    def __getitem__(self, k: int) -> Window:
        if k < 0:
            k += len(self)
        if not 0 <= k < len(self):
            raise IndexError(k)
        frame = self._frames[k]
        return Window(frame[: self.H], frame[self.H :], k)

    @property
    def windows(self) -> list[Window]:
        return [self[k] for k in range(len(self))]

    def histories(self, idx=None) -> np.ndarray:
        frames = self._frames if idx is None else self._frames[idx]
        return frames[..., : self.H]

    def targets(self, idx=None) -> np.ndarray:
        frames = self._frames if idx is None else self._frames[idx]
        return frames[..., self.H :]

    def indices(self, part: str) -> np.ndarray:
        """Window indices of ``part`` ('train', 'val', 'test' or 'all')."""
        if part == "all":
            return np.arange(len(self))
        if self.split is None:
            raise ValueError("dataset has not been split")
        train_end, val_end = self.split
        bounds = {"train": (0, train_end), "val": (train_end, val_end), "test": (val_end, len(self))}
        if part not in bounds:
            raise ValueError(f"unknown split part {part!r}")
        return np.arange(*bounds[part])


def make_windows(ts: TimeSeries, H: int = DEFAULT_LOOKBACK, P: int = DEFAULT_HORIZON) -> WindowedDataset:
    if H < 1 or P < 1:
        raise ValueError(f"H and P must be positive, got H={H} P={P}")
    if len(ts) < H + P:
        raise InsufficientDataError(f"series of length {len(ts)} is shorter than H + P = {H + P}")
    return WindowedDataset(ts, H, P)


def split_bounds(count: int, ratios=DEFAULT_RATIOS) -> tuple[int, int]:
    """Floor-based ``(train_end, val_end)``; the remainder goes to test."""
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError(f"ratios must be three positive numbers, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    # tolerate binary rounding: 0.7 + 0.15 evaluates a hair below 0.85
    train_end = math.floor(ratios[0] * count + 1e-9)
    val_end = math.floor((ratios[0] + ratios[1]) * count + 1e-9)
    if not 0 < train_end < val_end < count:
        raise InsufficientDataError(
            f"{count} windows cannot be split {tuple(ratios)} with every part non-empty"
        )
    return train_end, val_end


def split_chronological(ds: WindowedDataset, ratios=DEFAULT_RATIOS) -> WindowedDataset:
    return replace(ds, split=split_bounds(len(ds), ratios))


def prepare_dataset(
    ts: TimeSeries,
    H: int = DEFAULT_LOOKBACK,
    P: int = DEFAULT_HORIZON,
    ratios=DEFAULT_RATIOS,
    scaler: Optional[ScalerParams] = None,
) -> tuple[WindowedDataset, ScalerParams]:
    """Raw watt series to a normalized, split dataset.

    Unless ``scaler`` is given it is fitted on the samples the training
    windows touch (histories and targets), never on validation or test.
    """
    if len(ts) < H + P:
        raise InsufficientDataError(f"series of length {len(ts)} is shorter than H + P = {H + P}")
    train_end, val_end = split_bounds(len(ts) - H - P + 1, ratios)
    if scaler is None:
        scaler = fit_minmax(ts.slice(0, train_end - 1 + H + P))
    ds = make_windows(transform(ts, scaler), H, P)
    return replace(ds, split=(train_end, val_end)), scaler
