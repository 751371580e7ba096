import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpuforecast.synth import SynthConfig, generate


def test_degenerate_config_is_constant():
    cfg = SynthConfig(duration=500, base_load=7_000.0, arrival_rate=0.0, noise_std=0.0, spike_prob=0.0)
    ts = generate(cfg)
    assert len(ts) == 500 and ts.step == 1.0 and ts.start_time == 0.0
    assert np.all(ts.values == 7_000.0)


def test_seed_determinism():
    a = generate(SynthConfig(duration=3_000, seed=4))
    b = generate(SynthConfig(duration=3_000, seed=4))
    c = generate(SynthConfig(duration=3_000, seed=5))
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_prefix_is_independent_of_duration():
    # job draws come first and spike draws last, so only the noise stream differs in length
    short = SynthConfig(duration=1_000, noise_std=0.0, spike_prob=0.0)
    long = SynthConfig(duration=2_000, noise_std=0.0, spike_prob=0.0)
    assert np.array_equal(generate(short).values, generate(long).values[:1_000])


def test_long_run_mean_matches_occupancy_estimate():
    # Monte-Carlo over ten seeds of 1e5 s each
    cfg = SynthConfig(duration=100_000)
    means = [generate(SynthConfig(duration=100_000, seed=s)).values.mean() for s in range(10)]
    assert np.mean(means) == pytest.approx(cfg.expected_mean(), rel=0.10)


def test_clipping_to_cap():
    cfg = SynthConfig(duration=5_000, base_load=30_000.0, arrival_rate=20.0, job_power=(5_000.0, 9_000.0), cap=40_000.0)
    v = generate(cfg).values
    assert v.max() <= 40_000.0
    assert np.any(v == 40_000.0)


def test_iteration_square_wave_is_visible():
    # one job, no noise: power alternates between full and a reduced level
    cfg = SynthConfig(
        duration=20_000, seed=1, base_load=0.0, arrival_rate=0.5, noise_std=0.0, spike_prob=0.0,
        iteration_period=(60.0, 61.0), iteration_amplitude=1.0,
    )
    v = generate(cfg).values
    levels = np.unique(np.round(v[v > 0], 6))
    assert len(levels) >= 2


@settings(max_examples=25, deadline=None)
@given(
    st.integers(0, 2**31 - 1),
    st.floats(0.0, 30.0),
    st.floats(0.0, 2_000.0),
    st.floats(0.0, 0.05),
)
def test_output_invariants(seed, rate, noise, spikes):
    cfg = SynthConfig(duration=2_000, seed=seed, arrival_rate=rate, noise_std=noise, spike_prob=spikes, base_load=100.0)
    v = generate(cfg).values
    assert v.shape == (2_000,)
    assert np.all(np.isfinite(v)) and v.min() >= 0.0 and v.max() <= cfg.cap


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(job_power=(5.0, 5.0)),
        dict(job_duration=(10.0, 1.0)),
        dict(cap=1_000.0),
        dict(iteration_amplitude=1.5),
        dict(spike_prob=2.0),
        dict(duration=0),
    ],
)
def test_invalid_configs(kwargs):
    with pytest.raises(ValueError):
        SynthConfig(**kwargs)


def test_config_dict_round_trip():
    cfg = SynthConfig(seed=9, job_power=(1.0, 2.0))
    assert SynthConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        SynthConfig.from_dict({"jobs": 3})
