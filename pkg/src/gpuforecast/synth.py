"""Synthetic 1 Hz GPU-cluster power traces.

The load is a base draw plus training jobs. Each job is a rectangular pulse
(Poisson arrivals, uniform duration and power) whose power alternates
between full and ``1 - a`` of full on a square wave (``a`` drawn per job
from ``[amplitude / 2, amplitude]``), the way
iteration boundaries (compute vs. sync/checkpoint) show up on real GPU
power. Gaussian noise and rare single-sample spikes or dips sit on top and
the result is clipped to ``[0, cap]``.

Random draws happen in this order from one ``default_rng(seed)``:

1. job arrivals, one job at a time: inter-arrival gap, duration, power,
   iteration period, iteration amplitude, phase (arrivals start ``max duration`` before t=0 so
   the trace begins in steady state);
2. per-sample noise;
3. spike mask, spike magnitudes, spike signs.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .ingest import TimeSeries


@dataclass(frozen=True)
class SynthConfig:
    duration: int = 20_000
    seed: int = 0
    base_load: float = 5_000.0
    arrival_rate: float = 3.0  # jobs per hour
    job_power: tuple[float, float] = (1_000.0, 4_000.0)
    job_duration: tuple[float, float] = (3_600.0, 10_800.0)
    iteration_period: tuple[float, float] = (60.0, 61.0)
    iteration_amplitude: float = 1.0
    noise_std: float = 50.0
    spike_prob: float = 0.0005
    spike_magnitude: tuple[float, float] = (1_000.0, 3_000.0)
    cap: float = 45_000.0
    start_time: float = 0.0

    def __post_init__(self):
        for name in ("job_power", "job_duration", "iteration_period", "spike_magnitude"):
            lo, hi = (float(v) for v in getattr(self, name))
            object.__setattr__(self, name, (lo, hi))
            if not (0 <= lo < hi):
                raise ValueError(f"{name} must be a non-degenerate range (0 <= low < high), got {(lo, hi)}")
        if self.duration < 1:
            raise ValueError("duration must be at least 1 second")
        if self.iteration_period[0] <= 0:
            raise ValueError("iteration periods must be positive")
        if not 0 <= self.iteration_amplitude <= 1:
            raise ValueError("iteration_amplitude must be in [0, 1]")
        if self.base_load < 0 or self.arrival_rate < 0 or self.noise_std < 0:
            raise ValueError("base_load, arrival_rate and noise_std must be non-negative")
        if not 0 <= self.spike_prob <= 1:
            raise ValueError("spike_prob must be a probability")
        if not self.cap > self.base_load:
            raise ValueError("cap must exceed base_load")

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown synth option(s): {', '.join(sorted(unknown))}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})

    def expected_mean(self) -> float:
        """Occupancy estimate of the long-run mean, ignoring clipping.

        Concurrent jobs average ``rate * E[duration]`` (Little's law); each
        draws ``E[power] * (1 - E[a] / 2)`` over a square-wave cycle, with
        ``E[a] = 3/4 * amplitude``.
        Noise and spikes are zero-mean.
        """
        mean_jobs = self.arrival_rate / 3600.0 * sum(self.job_duration) / 2.0
        mean_power = sum(self.job_power) / 2.0 * (1.0 - 0.375 * self.iteration_amplitude)
        return self.base_load + mean_jobs * mean_power


def generate(config: SynthConfig) -> TimeSeries:
    rng = np.random.default_rng(config.seed)
    n = config.duration
    t = np.arange(n, dtype=np.float64)
    load = np.full(n, float(config.base_load))

    if config.arrival_rate > 0:
        mean_gap = 3600.0 / config.arrival_rate  # inf for vanishing rates, which ends the loop
        clock = -config.job_duration[1]
        while True:
            clock += rng.standard_exponential() * mean_gap
            if clock >= n:
                break
            dur = rng.uniform(*config.job_duration)
            power = rng.uniform(*config.job_power)
            period = rng.uniform(*config.iteration_period)
            amplitude = rng.uniform(config.iteration_amplitude / 2.0, config.iteration_amplitude)
            phase = rng.uniform(0.0, period)
            lo = max(int(np.ceil(clock)), 0)
            hi = min(int(np.ceil(clock + dur)), n)
            if hi <= lo:
                continue
            # first half of each iteration at full power, second half reduced
            low_phase = ((t[lo:hi] - clock + phase) % period) >= period / 2.0
            load[lo:hi] += power * np.where(low_phase, 1.0 - amplitude, 1.0)

    if config.noise_std > 0:
        load += rng.normal(0.0, config.noise_std, size=n)
    if config.spike_prob > 0:
        hit = rng.random(n) < config.spike_prob
        k = int(hit.sum())
        mags = rng.uniform(*config.spike_magnitude, size=k)
        signs = np.where(rng.random(k) < 0.5, -1.0, 1.0)
        load[hit] += signs * mags

    np.clip(load, 0.0, config.cap, out=load)
    return TimeSeries(config.start_time, 1.0, load)
