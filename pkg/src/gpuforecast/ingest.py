"""Power-log ingestion: parse per-GPU CSV logs into a facility-level 1 Hz load series.

Log layout (UTF-8, ``\\n`` or ``\\r\\n``)::

    timestamp,node_id,job_id,gpu_index,power_watts
    0.0,n1,j1,0,100.0
    0.1,n2,,1,150.0

``job_id`` may be empty. Aggregation sums per-device bucket means, holding
the last known mean for devices that miss a bucket.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import IO, Optional, Sequence, Union

import numpy as np

LOG_HEADER = ("timestamp", "node_id", "job_id", "gpu_index", "power_watts")
SERIES_HEADER = ("t_seconds", "power_watts")


class LogFormatError(ValueError):
    """Missing or unexpected CSV header."""


class LogParseError(ValueError):
    """A data row could not be parsed. ``line`` is 1-based and counts the header."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class PowerRecord:
    timestamp: float
    node_id: str
    job_id: Optional[str]
    gpu_index: int
    power: float

    def __post_init__(self):
        if not math.isfinite(self.timestamp):
            raise ValueError("timestamp must be finite")
        if not math.isfinite(self.power) or self.power < 0:
            raise ValueError(f"power must be finite and >= 0, got {self.power}")
        if self.gpu_index < 0:
            raise ValueError("gpu_index must be non-negative")


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled load: sample ``k`` sits at ``start_time + k * step``."""

    start_time: float
    step: float
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError("values must be one-dimensional")
        if not (self.step > 0 and math.isfinite(self.step)):
            raise ValueError(f"step must be positive, got {self.step}")
        if not math.isfinite(self.start_time):
            raise ValueError("start_time must be finite")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def times(self) -> np.ndarray:
        return self.start_time + self.step * np.arange(len(self.values))

    def time_at(self, index: int) -> float:
        return self.start_time + self.step * index

    def slice(self, start: int, stop: int) -> "TimeSeries":
        return TimeSeries(self.time_at(start), self.step, self.values[start:stop])


def _open_text(source: Union[bytes, IO[bytes], IO[str]]) -> IO[str]:
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8"), newline="")
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8", newline="")


def parse_power_log(source) -> list[PowerRecord]:
    """Parse a per-GPU power log.

    ``source`` is raw bytes or a binary/text file object. Raises
    :class:`LogFormatError` on a bad header and :class:`LogParseError`
    (with the offending line number) on a bad row.
    """
    reader = csv.reader(_open_text(source))
    try:
        header = next(reader)
    except StopIteration:
        raise LogFormatError("empty input: header expected") from None
    if tuple(h.strip() for h in header) != LOG_HEADER:
        raise LogFormatError(f"expected header {','.join(LOG_HEADER)!r}, got {','.join(header)!r}")

    records = []
    for row in reader:
        line = reader.line_num
        if not row:
            continue
        if len(row) != len(LOG_HEADER):
            raise LogParseError(line, f"expected {len(LOG_HEADER)} columns, got {len(row)}")
        ts_raw, node, job, gpu_raw, power_raw = (c.strip() for c in row)
        try:
            ts = float(ts_raw)
            power = float(power_raw)
        except ValueError:
            raise LogParseError(line, "timestamp and power_watts must be numeric") from None
        try:
            gpu = int(gpu_raw)
        except ValueError:
            raise LogParseError(line, f"gpu_index must be an integer, got {gpu_raw!r}") from None
        if not math.isfinite(ts):
            raise LogParseError(line, "timestamp must be finite")
        if not math.isfinite(power) or power < 0:
            raise LogParseError(line, f"power must be finite and non-negative, got {power_raw}")
        if gpu < 0:
            raise LogParseError(line, "gpu_index must be non-negative")
        records.append(PowerRecord(ts, node, job or None, gpu, power))
    return records


def aggregate_total_load(records: Sequence[PowerRecord], bucket: float = 1.0) -> TimeSeries:
    """Sum per-device bucket means into one facility load series.

    Buckets start at ``floor(min timestamp)``. A device absent from a bucket
    contributes its most recent bucket mean, or zero before it first appears.
    Job IDs do not split devices: a (node, gpu) pair is one stream.
    """
    if not (bucket > 0):
        raise ValueError(f"bucket must be positive, got {bucket}")
    if len(records) == 0:
        raise ValueError("cannot aggregate an empty record set")

    ts = np.array([r.timestamp for r in records], dtype=np.float64)
    power = np.array([r.power for r in records], dtype=np.float64)
    devices: dict[tuple[str, int], int] = {}
    dev = np.array([devices.setdefault((r.node_id, r.gpu_index), len(devices)) for r in records])

    start = math.floor(ts.min())
    idx = np.floor((ts - start) / bucket).astype(np.int64)
    n_buckets = int(idx.max()) + 1
    n_dev = len(devices)

    sums = np.zeros((n_dev, n_buckets))
    counts = np.zeros((n_dev, n_buckets))
    np.add.at(sums, (dev, idx), power)
    np.add.at(counts, (dev, idx), 1.0)

    total = np.zeros(n_buckets)
    for d in range(n_dev):
        seen = counts[d] > 0
        means = np.where(seen, sums[d] / np.where(seen, counts[d], 1.0), 0.0)
        # index of the latest bucket with data at or before each bucket, -1 if none yet
        last = np.maximum.accumulate(np.where(seen, np.arange(n_buckets), -1))
        total += np.where(last >= 0, means[np.maximum(last, 0)], 0.0)
    return TimeSeries(float(start), float(bucket), total)


def resample(ts: TimeSeries, new_step: float) -> TimeSeries:
    """Downsample by averaging groups of consecutive samples; a trailing partial group is dropped."""
    ratio = new_step / ts.step
    factor = round(ratio)
    if factor < 1 or not math.isclose(ratio, factor, rel_tol=1e-9, abs_tol=0.0):
        raise ValueError(f"new_step {new_step} is not a positive integer multiple of step {ts.step}")
    if factor == 1:
        return ts
    n = len(ts) // factor
    values = ts.values[: n * factor].reshape(n, factor).mean(axis=1)
    return TimeSeries(ts.start_time, ts.step * factor, values)


def read_series_csv(source) -> TimeSeries:
    """Read a two-column ``t_seconds,power_watts`` file written by :func:`write_series_csv`."""
    reader = csv.reader(_open_text(source))
    try:
        header = next(reader)
    except StopIteration:
        raise LogFormatError("empty input: header expected") from None
    if tuple(h.strip() for h in header) != SERIES_HEADER:
        raise LogFormatError(f"expected header {','.join(SERIES_HEADER)!r}, got {','.join(header)!r}")
    times, values = [], []
    for row in reader:
        if not row:
            continue
        if len(row) != 2:
            raise LogParseError(reader.line_num, f"expected 2 columns, got {len(row)}")
        try:
            times.append(float(row[0]))
            values.append(float(row[1]))
        except ValueError:
            raise LogParseError(reader.line_num, "non-numeric value") from None
        if not math.isfinite(values[-1]) or values[-1] < 0:
            raise LogParseError(reader.line_num, f"power must be finite and non-negative, got {row[1]}")
    if not values:
        raise ValueError("series file has no samples")
    if len(times) == 1:
        return TimeSeries(times[0], 1.0, np.array(values))
    t = np.array(times)
    steps = np.diff(t)
    step = float(steps.mean())
    if step <= 0 or not np.allclose(steps, step, rtol=1e-6, atol=1e-9):
        raise LogParseError(reader.line_num, "t_seconds is not uniformly spaced")
    return TimeSeries(times[0], step, np.array(values))


def write_series_csv(ts: TimeSeries, stream: IO[str]) -> None:
    stream.write(",".join(SERIES_HEADER) + "\n")
    for t, v in zip(ts.times, ts.values):
        stream.write(f"{float(t)!r},{float(v)!r}\n")


def load_series(path, bucket: float = 1.0) -> TimeSeries:
    """Load either a two-column series file or a raw power log (aggregated to ``bucket``)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    first = raw.split(b"\n", 1)[0].strip().decode("utf-8", errors="replace")
    if tuple(first.split(",")) == LOG_HEADER:
        return aggregate_total_load(parse_power_log(raw), bucket)
    return read_series_csv(raw)

