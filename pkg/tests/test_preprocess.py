import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpuforecast.ingest import TimeSeries
from gpuforecast.preprocess import (
    DegenerateScalerError,
    InsufficientDataError,
    ScalerParams,
    fit_minmax,
    inverse_transform,
    make_windows,
    prepare_dataset,
    split_bounds,
    split_chronological,
    transform,
)


def series(values, start=0.0):
    return TimeSeries(start, 1.0, values)


def test_fit_minmax():
    assert fit_minmax(series([3, 1, 2])) == ScalerParams(1.0, 3.0)
    with pytest.raises(DegenerateScalerError):
        fit_minmax(series([7.0, 7.0]))
    with pytest.raises(ValueError):
        fit_minmax(series([]))


def test_transform_midpoint_and_no_clipping():
    s = ScalerParams(0.0, 45000.0)
    out = transform(series([22500.0, 90000.0, 0.0]), s)
    assert list(out.values) == [0.5, 2.0, 0.0]


def test_scaler_rejects_inverted_bounds():
    with pytest.raises(DegenerateScalerError):
        ScalerParams(2.0, 1.0)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(0, 1e6, allow_nan=False), min_size=2, max_size=50),
    st.floats(0, 1e5, allow_nan=False),
    st.floats(1.0, 1e5, allow_nan=False),
)
def test_scaler_round_trip(values, lo, width):
    s = ScalerParams(lo, lo + width)
    back = inverse_transform(transform(series(values), s), s).values
    np.testing.assert_allclose(back, values, rtol=1e-12, atol=1e-12 * (lo + width))


def test_window_counts():
    assert len(make_windows(series(np.arange(390.0)))) == 1
    assert len(make_windows(series(np.arange(391.0)))) == 2
    with pytest.raises(InsufficientDataError):
        make_windows(series(np.arange(389.0)))


def test_window_contents():
    ds = make_windows(series(np.arange(10.0)), H=3, P=2)
    w = ds[4]
    assert list(w.history) == [4, 5, 6]
    assert list(w.target) == [7, 8]
    assert w.origin_index == 4
    assert [x.origin_index for x in ds.windows] == list(range(6))
    assert ds.histories().shape == (6, 3) and ds.targets().shape == (6, 2)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 40), st.integers(1, 20), st.integers(0, 100))
def test_window_count_formula_and_no_leakage(H, P, extra):
    N = H + P + extra
    ds = make_windows(series(np.arange(float(N))), H, P)
    assert len(ds) == N - H - P + 1
    # values equal their own sample index, so windows expose source indices directly
    assert np.all(ds.targets().min(axis=1) > ds.histories().max(axis=1))
    assert np.all(ds.targets()[:, 0] == ds.histories()[:, -1] + 1)


def test_split_bounds_examples():
    assert split_bounds(100) == (70, 85)
    assert split_bounds(20) == (14, 17)
    with pytest.raises(ValueError):
        split_bounds(100, (0.5, 0.2, 0.2))
    with pytest.raises(InsufficientDataError):
        split_bounds(3)


@settings(max_examples=200, deadline=None)
@given(st.integers(7, 5000))
def test_split_monotone_and_covering(count):
    train_end, val_end = split_bounds(count)
    ds = split_chronological(make_windows(series(np.arange(float(count) + 1)), 1, 1))
    tr, va, te = (ds.indices(p) for p in ("train", "val", "test"))
    assert (ds.split) == (train_end, val_end)
    assert tr.max() < va.min() and va.max() < te.min()
    assert np.array_equal(np.concatenate([tr, va, te]), np.arange(count))


def test_prepare_dataset_fits_scaler_on_train_samples_only():
    values = np.concatenate([np.linspace(0, 10, 250), np.full(100, 1000.0)])
    ds, scaler = prepare_dataset(series(values), H=10, P=5)
    train_end, _ = ds.split
    touched = values[: train_end - 1 + 10 + 5]
    assert scaler == ScalerParams(touched.min(), touched.max())
    assert scaler.max < 1000.0
    # test split keeps values above the fitted range
    assert ds.targets(ds.indices("test")).max() > 1.0
