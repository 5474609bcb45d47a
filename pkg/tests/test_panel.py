import datetime as dt
import json

import numpy as np
import pandas as pd
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats as sps

from nordepf import panel, synthetic
from nordepf.errors import (
    AlignmentError,
    ConfigError,
    DataError,
    EmptyInputError,
    InsufficientDataError,
    UnfillableColumnError,
)
from nordepf.panel import Availability, ColumnMeta, Frequency, HourlyPanel, RawSeries, ZoneId

from .conftest import make_raw


def _hours_between(a, b):
    # Independent count through the datetime module.
    return int((b - a).total_seconds() // 3600)


UTC = dt.timezone.utc


@pytest.mark.parametrize(
    "start,end,expected",
    [
        ("2019-01-01T00:00Z", "2019-01-01T03:00Z", 3),
        ("2019-01-01T00:00Z", "2024-01-01T00:00Z", _hours_between(dt.datetime(2019, 1, 1, tzinfo=UTC), dt.datetime(2024, 1, 1, tzinfo=UTC))),
        ("2025-01-01T00:00Z", "2025-12-31T00:00Z", _hours_between(dt.datetime(2025, 1, 1, tzinfo=UTC), dt.datetime(2025, 12, 31, tzinfo=UTC))),
    ],
)
def test_hourly_index_counts(start, end, expected):
    idx = panel.build_hourly_index(start, end)
    assert len(idx) == expected
    assert idx[0] == pd.Timestamp(start)
    assert idx[-1] == pd.Timestamp(end) - pd.Timedelta(hours=1)


def test_hourly_index_frozen_counts():
    assert len(panel.build_hourly_index("2019-01-01T00:00Z", "2024-01-01T00:00Z")) == 43_824
    assert len(panel.build_hourly_index("2024-01-01T00:00Z", "2025-01-01T00:00Z")) == 8_784
    assert len(panel.build_hourly_index("2025-01-01T00:00Z", "2025-12-31T00:00Z")) == 8_736


@pytest.mark.parametrize("start,end", [("2019-01-01T00:30Z", "2019-01-02T00:00Z"), ("2019-01-02T00:00Z", "2019-01-01T00:00Z")])
def test_hourly_index_rejects_bad_bounds(start, end):
    with pytest.raises(AlignmentError):
        panel.build_hourly_index(start, end)


def test_hourly_index_spans_dst_without_gaps():
    # Local clocks jump on 2021-03-28 and 2021-10-31; the UTC spine must not.
    idx = panel.build_hourly_index("2021-03-27T00:00Z", "2021-11-01T00:00Z")
    assert (np.diff(idx.as_unit("s").asi8) == 3600).all()


def test_zone_round_trip():
    assert [str(z) for z in ZoneId] == ["NO1", "NO2", "NO3", "NO4", "NO5"]
    for z in ZoneId:
        assert ZoneId.parse(str(z)) is z
    assert ZoneId.parse("no3") is ZoneId.NO3
    with pytest.raises(ConfigError):
        ZoneId.parse("SE3")


def test_raw_series_validation():
    idx = pd.DatetimeIndex(["2021-01-01T02:00Z", "2021-01-01T01:00Z"])
    with pytest.raises(DataError, match="increasing"):
        make_raw("x", idx, [1, 2])
    naive = pd.date_range("2021-01-01", periods=3, freq="h")
    with pytest.raises(DataError, match="tz-aware"):
        RawSeries("x", ColumnMeta(Frequency.HOURLY, Availability.DAY_AHEAD), pd.Series([1.0, 2, 3], index=naive))
    hourly = pd.date_range("2021-01-01", periods=3, freq="h", tz="UTC")
    with pytest.raises(DataError, match="spacing"):
        make_raw("x", hourly, [1, 2, 3], frequency="daily")
    # Gaps are fine.
    gappy = pd.DatetimeIndex(["2021-01-01T00:00Z", "2021-01-03T00:00Z", "2021-01-04T00:00Z"])
    make_raw("x", gappy, [1, 2, 3], frequency="daily")


def test_forward_fill_weekly_value_holds_for_the_week():
    idx = panel.build_hourly_index("2021-01-04T00:00Z", "2021-01-18T00:00Z")
    weekly = make_raw("reservoir", pd.DatetimeIndex(["2021-01-04T00:00Z", "2021-01-11T00:00Z"]), [70.0, 65.0], "weekly")
    out = panel.align_forward_fill(weekly, idx)
    assert (out.iloc[:168] == 70.0).all()
    assert (out.iloc[168:] == 65.0).all()


def test_forward_fill_daily_close_and_leading_gap():
    idx = panel.build_hourly_index("2021-01-01T00:00Z", "2021-01-04T00:00Z")
    daily = make_raw("ttf", pd.DatetimeIndex(["2021-01-01T17:00Z", "2021-01-02T17:00Z"]), [46.9, 48.0], "daily")
    out = panel.align_forward_fill(daily, idx)
    assert out.iloc[:17].isna().all()
    assert (out.loc["2021-01-01T17:00Z":"2021-01-02T16:00Z"] == 46.9).all()
    assert (out.loc["2021-01-02T17:00Z":] == 48.0).all()


def test_forward_fill_hourly_identity():
    idx = panel.build_hourly_index("2021-01-01T00:00Z", "2021-01-02T00:00Z")
    s = make_raw("x", idx, np.arange(24.0))
    np.testing.assert_array_equal(panel.align_forward_fill(s, idx).to_numpy(), np.arange(24.0))


def test_forward_fill_empty_series():
    idx = panel.build_hourly_index("2021-01-01T00:00Z", "2021-01-02T00:00Z")
    empty = make_raw("x", pd.DatetimeIndex([], tz="UTC"), [])
    with pytest.raises(EmptyInputError):
        panel.align_forward_fill(empty, idx)


@given(
    offsets=st.lists(st.integers(0, 24 * 20), min_size=1, max_size=25, unique=True),
    cut=st.integers(0, 24 * 21),
    bump=st.floats(-1e3, 1e3, allow_nan=False).filter(lambda x: x != 0),
)
def test_forward_fill_matches_brute_force_and_is_causal(offsets, cut, bump):
    offsets = sorted(offsets)
    base = pd.Timestamp("2021-01-01T00:00Z")
    stamps = pd.DatetimeIndex([base + pd.Timedelta(hours=o) for o in offsets])
    values = np.arange(len(offsets), dtype=float) + 0.5
    idx = panel.build_hourly_index(base, base + pd.Timedelta(hours=24 * 21))
    out = panel.align_forward_fill(make_raw("x", stamps, values), idx).to_numpy()

    # Brute force: the latest observation at or before each hour.
    expected = []
    for h in range(len(idx)):
        prior = [v for o, v in zip(offsets, values) if o <= h]
        expected.append(prior[-1] if prior else np.nan)
    np.testing.assert_array_equal(out, np.array(expected))

    # Perturbing observations at or after ``cut`` leaves earlier hours alone.
    perturbed = np.where(np.array(offsets) >= cut, values + bump, values)
    out2 = panel.align_forward_fill(make_raw("x", stamps, perturbed), idx).to_numpy()
    np.testing.assert_array_equal(out[:cut], out2[:cut])


def _panel(data: dict, meta: dict, start="2021-01-01T00:00Z"):
    n = len(next(iter(data.values())))
    idx = panel.build_hourly_index(start, pd.Timestamp(start) + pd.Timedelta(hours=n))
    return HourlyPanel(ZoneId.NO1, pd.DataFrame(data, index=idx), meta)


DA = ColumnMeta(Frequency.HOURLY, Availability.DAY_AHEAD)
PD = ColumnMeta(Frequency.HOURLY, Availability.POST_DELIVERY)


def test_leakage_filter_keeps_forecast_only():
    p = _panel({"price": [1.0, 2], "actual_load": [3.0, 4], "load_forecast": [5.0, 6]},
               {"price": DA, "actual_load": PD, "load_forecast": DA})
    out, removed = panel.leakage_filter(p)
    assert removed == ["actual_load"]
    assert out.exogenous == ["load_forecast"]
    assert all(m.availability is Availability.DAY_AHEAD for m in out.column_meta.values())


def test_leakage_filter_identity_and_vacuous():
    p = _panel({"price": [1.0, 2], "x": [3.0, 4]}, {"price": DA, "x": DA})
    out, removed = panel.leakage_filter(p)
    assert removed == [] and out.data.equals(p.data)
    q = _panel({"price": [1.0, 2], "a": [3.0, 4]}, {"price": DA, "a": PD})
    out, _ = panel.leakage_filter(q)
    assert list(out.data.columns) == ["price"]


def test_sparse_drop_is_strict():
    nan = np.nan
    p = _panel(
        {
            "price": [1.0] * 10,
            "sixty": [nan] * 6 + [1.0] * 4,
            "fifty": [nan] * 5 + [1.0] * 5,
            "full": [1.0] * 10,
        },
        {"price": DA, "sixty": DA, "fifty": DA, "full": DA},
    )
    out, dropped = panel.drop_sparse_columns(p, 0.5)
    assert dropped == {"sixty": 0.6}
    assert out.exogenous == ["fifty", "full"]
    with pytest.raises(ConfigError):
        panel.drop_sparse_columns(p, 0.0)


@pytest.mark.parametrize(
    "values,expected",
    [([np.nan, 2, np.nan, 4], [2, 2, 2, 4]), ([1, 2, 3], [1, 2, 3]), ([np.nan, np.nan, 5], [5, 5, 5])],
)
def test_fill_edges_examples(values, expected):
    p = _panel({"price": [1.0] * len(values), "x": np.asarray(values, float)}, {"price": DA, "x": DA})
    out, counts = panel.fill_edges(p)
    np.testing.assert_array_equal(out.data["x"].to_numpy(), expected)
    assert counts.get("x", 0) == int(np.isnan(np.asarray(values, float)).sum())


def test_fill_edges_idempotent_and_unfillable():
    p = _panel({"price": [1.0, np.nan, 3.0], "x": [np.nan, 1.0, np.nan]}, {"price": DA, "x": DA})
    once, _ = panel.fill_edges(p)
    twice, counts = panel.fill_edges(once)
    assert once.data.equals(twice.data) and counts == {}
    bad = _panel({"price": [1.0, 2.0], "x": [np.nan, np.nan]}, {"price": DA, "x": DA})
    with pytest.raises(UnfillableColumnError):
        panel.fill_edges(bad)


def test_panel_rejects_gaps_and_missing_meta():
    idx = pd.DatetimeIndex(["2021-01-01T00:00Z", "2021-01-01T02:00Z"])
    with pytest.raises(DataError, match="contiguous"):
        HourlyPanel(ZoneId.NO1, pd.DataFrame({"price": [1.0, 2.0]}, index=idx), {"price": DA})
    idx = panel.build_hourly_index("2021-01-01T00:00Z", "2021-01-01T02:00Z")
    with pytest.raises(DataError, match="metadata"):
        HourlyPanel(ZoneId.NO1, pd.DataFrame({"price": [1.0, 2.0], "x": [1.0, 1.0]}, index=idx), {"price": DA})


def test_build_panel_report(small_panel):
    assert small_panel.data.notna().all().all()
    assert small_panel.exogenous == ["temperature", "load_forecast", "ttf", "reservoir_level"]
    assert (np.diff(small_panel.index.as_unit("s").asi8) == 3600).all()


def test_build_panel_integrity_report():
    idx = panel.build_hourly_index("2021-01-01T00:00Z", "2021-01-15T00:00Z")
    n = len(idx)
    sparse = np.full(n, np.nan)
    sparse[:10] = 1.0
    p, rep = panel.build_panel(
        "NO2",
        make_raw("price", idx, np.arange(n, dtype=float)),
        [make_raw("actual_load", idx, np.ones(n), availability="post-delivery"),
         make_raw("solar", idx, sparse),
         make_raw("ttf", pd.DatetimeIndex(["2021-01-02T00:00Z"]), [30.0], "daily")],
    )
    assert rep["leakage_removed"] == ["actual_load"]
    assert list(rep["sparse_dropped"]) == ["solar"]
    assert rep["fill_counts"] == {"ttf": 24}  # leading day back-filled
    assert rep["warmup"]["hours"] == 168
    assert rep["warmup"]["end_exclusive"] == "2021-01-08T00:00:00+00:00"
    assert p.exogenous == ["ttf"]


def test_descriptive_stats_against_scipy(rng):
    x = rng.standard_normal(100_000)
    p = _panel({"price": x}, {"price": DA})
    d = panel.descriptive_stats(p)
    assert d["skewness"] == pytest.approx(sps.skew(x), abs=1e-10)
    assert d["kurtosis"] == pytest.approx(sps.kurtosis(x, fisher=True) + 3, abs=1e-10)
    assert abs(d["skewness"]) < 0.05
    assert abs(d["kurtosis"] - 3) < 0.1
    assert d["std"] == pytest.approx(np.std(x, ddof=1))
    assert d["negative_share"] == pytest.approx(np.mean(x < 0))


def test_descriptive_stats_constant_and_short():
    p = _panel({"price": [5.0] * 30}, {"price": DA})
    d = panel.descriptive_stats(p)
    assert d["skewness"] == 0.0 and d["negative_share"] == 0.0
    assert np.isnan(d["kurtosis"])
    with pytest.raises(InsufficientDataError):
        panel.descriptive_stats(_panel({"price": [1.0, 2.0, 3.0]}, {"price": DA}))


def test_annual_means():
    idx = panel.build_hourly_index("2024-12-31T00:00Z", "2025-01-02T00:00Z")
    y = np.r_[np.full(24, 10.0), np.full(24, 30.0)]
    p = HourlyPanel(ZoneId.NO1, pd.DataFrame({"price": y}, index=idx), {"price": DA})
    assert panel.descriptive_stats(p)["annual_means"] == {2024: 10.0, 2025: 30.0}


def _write_csv(path, text, schema):
    path.write_text(text)
    path.with_suffix(".schema.json").write_text(json.dumps({"columns": schema}))


def test_read_snapshot_reports_line_numbers(tmp_path):
    schema = {"price": {"frequency": "hourly", "availability": "day-ahead"}}
    p = tmp_path / "a.csv"
    _write_csv(p, "timestamp,price\n2021-01-01T00:00Z,1\n2021-01-01T01:00Z,abc\n", schema)
    with pytest.raises(DataError, match=r"line\(s\) \[3\]"):
        panel.read_snapshot(p)
    _write_csv(p, "timestamp,price\nnot-a-time,1\n", schema)
    with pytest.raises(DataError, match=r"line\(s\) \[2\]"):
        panel.read_snapshot(p)
    _write_csv(p, "timestamp,price,extra\n2021-01-01T00:00Z,1,2\n", schema)
    with pytest.raises(DataError, match="missing from schema"):
        panel.read_snapshot(p)
    with pytest.raises(DataError, match="not found"):
        panel.read_snapshot(tmp_path / "missing.csv")


def test_effective_offset_shifts_availability(tmp_path):
    schema = {"reservoir_level": {"frequency": "weekly", "availability": "day-ahead", "effective_offset_hours": 36}}
    p = tmp_path / "w.csv"
    _write_csv(p, "timestamp,reservoir_level\n2021-01-04T00:00Z,70\n2021-01-11T00:00Z,60\n", schema)
    (s,) = panel.read_snapshot(p)
    assert s.observations.index[0] == pd.Timestamp("2021-01-05T12:00Z")


def test_synthetic_snapshots_round_trip(tmp_path):
    cfg = synthetic.SyntheticConfig(start="2021-01-01T00:00Z", end="2021-02-01T00:00Z")
    paths = synthetic.write_zone("NO4", tmp_path, cfg)
    p, rep = panel.load_zone("NO4", paths)
    assert rep["leakage_removed"] == ["actual_load"]
    assert "coal_price" in rep["sparse_dropped"]
    assert len(p) == 31 * 24
    panel.write_panel(p, tmp_path / "out.csv")
    back = panel.read_panel(tmp_path / "out.csv")
    pd.testing.assert_frame_equal(back.data, p.data, check_freq=False, check_names=False)
    assert back.column_meta == p.column_meta and back.zone is ZoneId.NO4
