"""Static figures: forecast vs. actual with residuals, training curves, model comparison."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 150,
}

COLORS = {"actual": "0.2", "FC_LSTM": "tab:blue", "GRU": "tab:orange", "CNN1D": "tab:green", "predicted": "tab:red"}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_forecast(
    t_seconds,
    actual,
    predicted: Mapping[str, np.ndarray],
    path,
    title: Optional[str] = None,
):
    """Upper panel: actual and predicted load (kW); lower panel: residuals (kW).

    ``predicted`` maps a label (usually the architecture) to a trace aligned
    with ``t_seconds``.
    """
    t = np.asarray(t_seconds, dtype=float)
    t = t - t[0] if len(t) else t
    actual = np.asarray(actual, dtype=float)
    with plt.rc_context(STYLE):
        fig, (top, bottom) = plt.subplots(
            2, 1, figsize=(7.0, 4.2), sharex=True, gridspec_kw={"height_ratios": [2, 1]}
        )
        top.plot(t, actual / 1e3, color=COLORS["actual"], lw=1.0, label="actual")
        for label, pred in predicted.items():
            pred = np.asarray(pred, dtype=float)
            color = COLORS.get(label, COLORS["predicted"])
            top.plot(t, pred / 1e3, color=color, lw=0.9, alpha=0.85, label=label)
            bottom.plot(t, (pred - actual) / 1e3, color=color, lw=0.7, label=label)
        bottom.axhline(0.0, color="0.5", lw=0.6)
        top.set_ylabel("GPU power (kW)")
        bottom.set_ylabel("residual (kW)")
        bottom.set_xlabel("time since window start (s)")
        top.legend(loc="upper right", ncol=len(predicted) + 1)
        if title:
            top.set_title(title)
        return _save(fig, path)


def plot_history(train_loss: Sequence[float], val_loss: Sequence[float], path, best_epoch: Optional[int] = None):
    epochs = np.arange(1, len(train_loss) + 1)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.0))
        ax.semilogy(epochs, train_loss, label="train")
        ax.semilogy(epochs, val_loss, label="validation")
        if best_epoch is not None and best_epoch >= 0:
            ax.axvline(best_epoch + 1, color="0.5", ls="--", lw=0.8, label="best")
        ax.set_xlabel("epoch")
        ax.set_ylabel("MSE (normalized)")
        ax.legend()
        return _save(fig, path)


def plot_trace(t_seconds, values, path, split_times: Sequence[float] = (), title: Optional[str] = None):
    """Full load trace with vertical lines at split boundaries."""
    t = np.asarray(t_seconds, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(7.0, 2.8))
        ax.plot(t / 3600.0, np.asarray(values) / 1e3, color=COLORS["actual"], lw=0.5)
        for s in split_times:
            ax.axvline(s / 3600.0, color="tab:red", ls="--", lw=0.8)
        ax.set_xlabel("time (h)")
        ax.set_ylabel("GPU power (kW)")
        if title:
            ax.set_title(title)
        return _save(fig, path)


def plot_metric_table(table: Mapping[str, Mapping[str, float]], path, metric: str = "r_squared"):
    """Bar chart of one metric per architecture; values may be per-seed lists."""
    labels = list(table)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 3.0))
        for i, label in enumerate(labels):
            vals = np.atleast_1d(np.asarray(table[label][metric], dtype=float))
            ax.bar(i, vals.mean(), color=COLORS.get(label, "0.5"), alpha=0.8)
            ax.plot(np.full(vals.shape, i), vals, "k.", ms=4)
        ax.set_xticks(range(len(labels)), labels)
        ax.set_ylabel(metric)
        return _save(fig, path)
