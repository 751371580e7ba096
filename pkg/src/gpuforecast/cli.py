"""Command-line entry point: ``gpuforecast <command> ...``.

Commands follow the workflow stages: ``synth`` / ``aggregate`` produce a
1 Hz load series, ``train`` fits a model, ``predict``, ``evaluate`` and
``export-plot`` apply it. Exit codes: 0 success, 2 configuration error,
3 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import plotting
from .config import ConfigError, RunConfig, load_run_config
from .evaluation import ResidualSeries, evaluate_model, predict_watts
from .ingest import LogFormatError, LogParseError, TimeSeries, aggregate_total_load, load_series, parse_power_log, write_series_csv
from .preprocess import DegenerateScalerError, InsufficientDataError, prepare_dataset
from .synth import generate
from .train import CheckpointError, TrainingDiverged, load_checkpoint, save_checkpoint, train

log = logging.getLogger("gpuforecast")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3

ZOOMS = {"full": None, "1min": 60.0, "10min": 600.0, "1h": 3600.0}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _config(args) -> RunConfig:
    cfg = load_run_config(args.config)
    cfg = cfg.with_overrides("preprocess", lookback=getattr(args, "lookback", None), horizon=getattr(args, "horizon", None))
    seed = getattr(args, "seed", None)
    cfg = cfg.with_overrides("synth", seed=seed)
    cfg = cfg.with_overrides("train", seed=seed)
    return cfg


def _read_series(path, bucket: float) -> TimeSeries:
    try:
        return load_series(path, bucket)
    except OSError as exc:
        raise CliError(EXIT_DATA, f"cannot read {path}: {exc.strerror}") from None
    except (LogFormatError, LogParseError, ValueError) as exc:
        raise CliError(EXIT_DATA, f"{path}: {exc}") from None


def _load_model(path):
    try:
        return load_checkpoint(path)
    except OSError as exc:
        raise CliError(EXIT_DATA, f"cannot read checkpoint {path}: {exc.strerror}") from None
    except CheckpointError as exc:
        raise CliError(EXIT_DATA, str(exc)) from None


def _write_text(path, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_DATA, f"cannot write {path}: {exc.strerror}") from None


def _dataset_for(weights, scaler, ts, cfg: RunConfig):
    H, P = weights.spec.lookback, weights.spec.horizon
    try:
        return prepare_dataset(ts, H, P, cfg.preprocess.ratios, scaler=scaler)[0]
    except InsufficientDataError as exc:
        raise CliError(EXIT_DATA, str(exc)) from None


# -- commands ----------------------------------------------------------------


def cmd_synth(args) -> int:
    cfg = _config(args)
    if args.duration is not None:
        cfg = cfg.with_overrides("synth", duration=args.duration)
    ts = generate(cfg.synth)
    try:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_series_csv(ts, fh)
    except OSError as exc:
        raise CliError(EXIT_DATA, f"cannot write {args.out}: {exc.strerror}") from None
    print(f"samples={len(ts)} min_w={ts.values.min():.1f} max_w={ts.values.max():.1f}")
    if args.figure:
        plotting.plot_trace(ts.times, ts.values, args.figure, title="synthetic GPU load")
    return EXIT_OK


def cmd_aggregate(args) -> int:
    try:
        with open(args.log, "rb") as fh:
            records = parse_power_log(fh)
        ts = aggregate_total_load(records, args.bucket)
    except OSError as exc:
        raise CliError(EXIT_DATA, f"cannot read {args.log}: {exc.strerror}") from None
    except (LogFormatError, LogParseError, ValueError) as exc:
        raise CliError(EXIT_DATA, f"{args.log}: {exc}") from None
    try:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_series_csv(ts, fh)
    except OSError as exc:
        raise CliError(EXIT_DATA, f"cannot write {args.out}: {exc.strerror}") from None
    print(f"records={len(records)} samples={len(ts)} max_w={ts.values.max():.1f}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    cfg = cfg.with_overrides(
        "train",
        arch=args.arch,
        max_epochs=args.epochs,
        hidden_size=args.hidden_size,
        learning_rate=args.lr,
        batch_size=args.batch_size,
        patience=args.patience,
    )
    ts = _read_series(args.data, cfg.preprocess.bucket)
    pre = cfg.preprocess
    try:
        data, scaler = prepare_dataset(ts, pre.lookback, pre.horizon, pre.ratios)
    except (InsufficientDataError, DegenerateScalerError) as exc:
        raise CliError(EXIT_DATA, str(exc)) from None
    try:
        weights, history = train(cfg.train, data)
    except TrainingDiverged as exc:
        raise CliError(EXIT_DATA, str(exc)) from None
    save_checkpoint(weights, scaler, cfg.train, args.checkpoint)
    history_path = args.history or str(Path(args.checkpoint).with_suffix(".history.csv"))
    _write_text(history_path, history.to_csv())
    if args.figure:
        plotting.plot_history(history.train_loss, history.val_loss, args.figure, history.best_epoch)
    best = history.val_loss[history.best_epoch]
    print(f"epochs={history.epochs} best_epoch={history.best_epoch + 1} best_val_loss={best!r}")
    return EXIT_OK


def cmd_predict(args) -> int:
    weights, scaler, _ = _load_model(args.checkpoint)
    cfg = _config(args)
    ts = _read_series(args.data, cfg.preprocess.bucket)
    H, P = weights.spec.lookback, weights.spec.horizon
    t = args.t_index
    if t < H - 1 or t >= len(ts):
        raise CliError(EXIT_DATA, f"t_index {t} needs {H} samples of history within a series of {len(ts)}")
    history = (ts.values[t - H + 1 : t + 1] - scaler.min) / scaler.span
    forecast = predict_watts(weights, scaler, history[None])[0]
    # clamp only at output; metrics elsewhere use the raw forecast
    forecast = np.maximum(forecast, 0.0)
    pairs = [[ts.time_at(t + k), float(w)] for k, w in enumerate(forecast, start=1)]
    text = json.dumps(pairs) + "\n"
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    weights, scaler, _ = _load_model(args.checkpoint)
    cfg = _config(args)
    ts = _read_series(args.data, cfg.preprocess.bucket)
    data = _dataset_for(weights, scaler, ts, cfg)
    result = evaluate_model(weights, scaler, data, "test")
    text = result.metrics.to_json()
    if args.metrics_out:
        _write_text(args.metrics_out, text)
    else:
        sys.stdout.write(text)
    if args.residuals_out:
        _write_text(args.residuals_out, result.residuals.to_csv())
    if args.figure:
        res = result.residuals
        plotting.plot_forecast(res.t_seconds, res.actual, {weights.arch: res.predicted}, args.figure,
                               title=f"{weights.arch}, test split, {weights.spec.horizon}-step-ahead")
    return EXIT_OK


def cmd_export_plot(args) -> int:
    weights, scaler, _ = _load_model(args.checkpoint)
    cfg = _config(args)
    ts = _read_series(args.data, cfg.preprocess.bucket)
    data = _dataset_for(weights, scaler, ts, cfg)
    result = evaluate_model(weights, scaler, data, "test")
    res: ResidualSeries = result.residuals
    if args.horizon_step is not None:
        k = args.horizon_step
        if not 1 <= k <= data.P:
            raise CliError(EXIT_CONFIG, f"--horizon-step must be in 1..{data.P}")
        t = data.series.start_time + data.series.step * (result.window_index + data.H + k - 1)
        res = ResidualSeries(t, result.actual[:, k - 1].copy(), result.predicted[:, k - 1].copy())

    first, last = float(res.t_seconds[0]), float(res.t_seconds[-1])
    length = args.range_len if args.range_len is not None else ZOOMS[args.zoom]
    start = args.range_start if args.range_start is not None else first
    if length is None:
        length = last - start + data.series.step
    if length <= 0 or start < first or start > last:
        raise CliError(EXIT_DATA, f"range start {start} is outside the test split [{first}, {last}]")
    view = res.select(start, length)
    if len(view) == 0:
        raise CliError(EXIT_DATA, "requested range contains no test samples")
    _write_text(args.out, view.to_csv())
    figure = args.figure or str(Path(args.out).with_suffix(".png"))
    plotting.plot_forecast(view.t_seconds, view.actual, {weights.arch: view.predicted}, figure,
                           title=f"{weights.arch} prediction ({length:g} s from t={start:g} s)")
    print(f"rows={len(view)} figure={figure}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gpuforecast", description="Forecast aggregate GPU-cluster power from 1 Hz load traces.")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, data=True):
        sp.add_argument("--config", help="INI run configuration")
        sp.add_argument("--seed", type=int)
        if data:
            sp.add_argument("--data", required=True, help="series CSV (t_seconds,power_watts) or raw power log")

    sp = sub.add_parser("synth", help="generate a synthetic 1 Hz GPU load trace")
    common(sp, data=False)
    sp.add_argument("--out", required=True)
    sp.add_argument("--duration", type=int)
    sp.add_argument("--figure", help="also render the trace to this image file")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("aggregate", help="aggregate a per-GPU power log into a facility series")
    sp.add_argument("--log", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--bucket", type=float, default=1.0)
    sp.set_defaults(func=cmd_aggregate)

    sp = sub.add_parser("train", help="train a forecaster and write a checkpoint")
    common(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--history", help="history CSV path (default: <checkpoint>.history.csv)")
    sp.add_argument("--figure", help="render the loss curves to this image file")
    sp.add_argument("--arch", choices=["FC_LSTM", "GRU", "CNN1D"])
    sp.add_argument("--lookback", type=int)
    sp.add_argument("--horizon", type=int)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--hidden-size", type=int)
    sp.add_argument("--lr", type=float)
    sp.add_argument("--batch-size", type=int)
    sp.add_argument("--patience", type=int)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("predict", help="forecast the horizon following sample --t-index")
    common(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--t-index", type=int, required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("evaluate", help="score a checkpoint on the test split")
    common(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--metrics-out")
    sp.add_argument("--residuals-out")
    sp.add_argument("--figure")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("export-plot", help="aligned actual/predicted CSV and figure for a test-split range")
    common(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--figure", help="image path (default: <out>.png)")
    sp.add_argument("--zoom", choices=list(ZOOMS), default="full")
    sp.add_argument("--range-start", type=float, help="start time in seconds (default: test split start)")
    sp.add_argument("--range-len", type=float, help="range length in seconds (overrides --zoom)")
    sp.add_argument("--horizon-step", type=int, help="which forecast step to plot (default: last)")
    sp.set_defaults(func=cmd_export_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
