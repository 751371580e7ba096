import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpuforecast.ingest import (
    LogFormatError,
    LogParseError,
    PowerRecord,
    TimeSeries,
    aggregate_total_load,
    load_series,
    parse_power_log,
    read_series_csv,
    resample,
    write_series_csv,
)

import oracles

HEADER = b"timestamp,node_id,job_id,gpu_index,power_watts\n"


def test_header_only_gives_no_records():
    assert parse_power_log(HEADER) == []


def test_rows_map_to_records_and_empty_job_is_absent():
    recs = parse_power_log(HEADER + b"0.0,n1,j1,0,100.0\n0.0,n2,,1,150.0\n")
    assert recs == [
        PowerRecord(0.0, "n1", "j1", 0, 100.0),
        PowerRecord(0.0, "n2", None, 1, 150.0),
    ]


def test_crlf_and_text_streams():
    data = "timestamp,node_id,job_id,gpu_index,power_watts\r\n1.5,a,,3,7\r\n"
    assert parse_power_log(io.StringIO(data, newline="")) == [PowerRecord(1.5, "a", None, 3, 7.0)]
    assert parse_power_log(io.BytesIO(data.encode())) == [PowerRecord(1.5, "a", None, 3, 7.0)]


def test_negative_power_reports_line():
    with pytest.raises(LogParseError) as err:
        parse_power_log(HEADER + b"0,n,j,0,1\n1,n,j,0,-5.0\n")
    assert err.value.line == 3


@pytest.mark.parametrize(
    "row",
    [b"0,n,j,0\n", b"x,n,j,0,1\n", b"0,n,j,0,watts\n", b"0,n,j,-1,1\n", b"0,n,j,1.5,1\n", b"nan,n,j,0,1\n"],
)
def test_malformed_rows(row):
    with pytest.raises(LogParseError) as err:
        parse_power_log(HEADER + row)
    assert err.value.line == 2


@pytest.mark.parametrize("data", [b"", b"time,node,job,gpu,power\n0,a,b,0,1\n"])
def test_bad_header(data):
    with pytest.raises(LogFormatError):
        parse_power_log(data)


def test_aggregate_two_devices_one_bucket():
    recs = [PowerRecord(0.0, "n1", "j", 0, 100.0), PowerRecord(0.2, "n2", "j", 0, 150.0)]
    ts = aggregate_total_load(recs)
    assert list(ts.values) == [250.0]
    assert ts.start_time == 0.0 and ts.step == 1.0


def test_aggregate_averages_within_bucket():
    recs = [PowerRecord(t / 10, "n", "j", 0, 100.0) for t in range(10)]
    assert list(aggregate_total_load(recs).values) == [100.0]


def test_aggregate_forward_fills_gaps():
    recs = [
        PowerRecord(0.0, "A", None, 0, 100.0),
        PowerRecord(0.0, "B", None, 0, 50.0),
        PowerRecord(1.0, "B", None, 0, 50.0),
    ]
    assert list(aggregate_total_load(recs).values) == [150.0, 150.0]


def test_aggregate_zero_before_first_appearance():
    recs = [PowerRecord(0.0, "A", None, 0, 10.0), PowerRecord(2.5, "B", None, 1, 5.0)]
    assert list(aggregate_total_load(recs).values) == [10.0, 10.0, 15.0]


def test_same_node_different_gpu_are_distinct_devices():
    recs = [PowerRecord(0.0, "n", None, 0, 1.0), PowerRecord(0.5, "n", None, 1, 2.0)]
    assert list(aggregate_total_load(recs).values) == [3.0]


def test_aggregate_errors():
    with pytest.raises(ValueError):
        aggregate_total_load([])
    with pytest.raises(ValueError):
        aggregate_total_load([PowerRecord(0.0, "n", None, 0, 1.0)], bucket=0)


record_st = st.builds(
    PowerRecord,
    timestamp=st.floats(0, 20, allow_nan=False).map(lambda t: round(t, 2)),
    node_id=st.sampled_from(["n1", "n2", "n3"]),
    job_id=st.none(),
    gpu_index=st.integers(0, 2),
    power=st.floats(0, 500, allow_nan=False),
)


@settings(max_examples=150, deadline=None)
@given(st.lists(record_st, min_size=1, max_size=40), st.sampled_from([0.5, 1.0, 2.0]))
def test_aggregate_matches_brute_force(records, bucket):
    ts = aggregate_total_load(records, bucket)
    start, expected = oracles.aggregate(records, bucket)
    assert ts.start_time == start
    assert ts.step == bucket
    np.testing.assert_allclose(ts.values, expected, rtol=1e-12, atol=1e-9)
    assert np.all(ts.values >= 0)


def test_resample_examples():
    ts = TimeSeries(0.0, 0.5, [1, 2, 3, 4])
    out = resample(ts, 1.0)
    assert list(out.values) == [1.5, 3.5] and out.step == 1.0
    assert list(resample(TimeSeries(0.0, 0.5, [1, 2, 3]), 1.0).values) == [1.5]
    same = resample(TimeSeries(0.0, 1.0, [4.0, 5.0]), 1.0)
    assert list(same.values) == [4.0, 5.0]


def test_resample_rejects_non_multiple():
    with pytest.raises(ValueError):
        resample(TimeSeries(0.0, 1.0, [1, 2, 3]), 1.5)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(0, 1e5, allow_nan=False), min_size=1, max_size=200),
    st.integers(1, 7),
)
def test_resample_preserves_mean_of_kept_samples(values, factor):
    ts = TimeSeries(0.0, 1.0, values)
    kept = (len(values) // factor) * factor
    if kept == 0:
        return
    out = resample(ts, float(factor))
    assert len(out) == len(values) // factor
    expected = math.fsum(values[:kept]) / kept
    assert out.values.mean() == pytest.approx(expected, rel=1e-12, abs=1e-9)


def test_timeseries_is_immutable_copy():
    src = np.array([1.0, 2.0])
    ts = TimeSeries(0.0, 1.0, src)
    src[0] = 99
    assert ts.values[0] == 1.0
    with pytest.raises(ValueError):
        ts.values[0] = 3.0


def test_series_csv_round_trip(tmp_path):
    ts = TimeSeries(10.0, 1.0, [0.1, 1 / 3, 2e4])
    buf = io.StringIO()
    write_series_csv(ts, buf)
    assert buf.getvalue().splitlines()[0] == "t_seconds,power_watts"
    back = read_series_csv(buf.getvalue().encode())
    assert back.start_time == 10.0
    assert np.array_equal(back.values, ts.values)

    path = tmp_path / "s.csv"
    path.write_text(buf.getvalue())
    assert np.array_equal(load_series(path).values, ts.values)


def test_load_series_detects_raw_log(tmp_path):
    path = tmp_path / "log.csv"
    path.write_bytes(HEADER + b"0.0,a,,0,100\n0.5,b,,0,50\n1.2,a,,0,120\n")
    ts = load_series(path)
    assert list(ts.values) == [150.0, 170.0]
