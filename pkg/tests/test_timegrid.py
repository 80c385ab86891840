import datetime as dt

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mfqvar import timegrid
from mfqvar.errors import AlignmentError, CoverageError, DataError, InsufficientHistoryError
from mfqvar.timegrid import DailyObs, MonthlyObs, build_panel, lagged_returns

from conftest import month_days


def _daily(days, rets=None):
    rets = np.arange(1, len(days) + 1, dtype=float) if rets is None else rets
    return [DailyObs(d, float(r)) for d, r in zip(days, rets)]


def test_minimal_alignment_with_one_lag():
    days = month_days(2020, 2, 20) + month_days(2020, 3, 20)
    monthly = [MonthlyObs("2020-01", 1.0), MonthlyObs("2020-02", 2.0), MonthlyObs("2020-03", 3.0)]
    panel = build_panel(_daily(days), monthly, k_lags=1)
    assert len(panel) == 40
    assert panel.n_trimmed == 0
    assert np.array_equal(panel.month_of, np.r_[np.ones(20), 2 * np.ones(20)].astype(int))


def test_coverage_error_when_history_is_one_month_short():
    days = month_days(2020, 12, 15)
    monthly = [MonthlyObs(f"2020-{m:02d}", 0.0) for m in range(1, 13)]  # 11 months before Dec
    with pytest.raises(CoverageError):
        build_panel(_daily(days), monthly, k_lags=12)


def test_trim_drops_leading_days_without_history():
    days = month_days(2020, 1, 10) + month_days(2020, 2, 10)
    monthly = [MonthlyObs("2020-01", 0.0), MonthlyObs("2020-02", 1.0)]
    panel = build_panel(_daily(days), monthly, k_lags=1, trim=True)
    assert panel.n_trimmed == 10
    assert panel.dates[0] == np.datetime64("2020-02-03")


def test_duplicate_date_is_an_alignment_error():
    days = month_days(2020, 2, 5)
    daily = _daily(days) + [DailyObs(days[2], 0.5)]
    with pytest.raises(AlignmentError):
        build_panel(daily, [MonthlyObs("2020-01", 0.0), MonthlyObs("2020-02", 0.0)], 1)


def test_monthly_gap_is_an_alignment_error():
    monthly = [MonthlyObs("2020-01", 0.0), MonthlyObs("2020-03", 0.0)]
    with pytest.raises(AlignmentError):
        build_panel(_daily(month_days(2020, 3, 5)), monthly, 1)


def test_unsorted_input_is_sorted():
    days = month_days(2020, 2, 6)
    daily = _daily(days)[::-1]
    panel = build_panel(daily, [MonthlyObs("2020-02", 0.0), MonthlyObs("2020-01", 0.0)], 1)
    assert np.all(np.diff(panel.dates) > np.timedelta64(0, "D"))
    assert panel.ret[0] == 1.0


def test_trailing_month_after_monthly_series_is_allowed():
    days = month_days(2020, 2, 5) + month_days(2020, 3, 5)
    panel = build_panel(_daily(days), [MonthlyObs("2020-01", 0.0), MonthlyObs("2020-02", 0.0)], 1)
    assert panel.month_of[-1] == len(panel.months)


def test_daily_beyond_coverage_is_rejected():
    days = month_days(2020, 2, 5) + month_days(2020, 5, 5)
    with pytest.raises(CoverageError):
        build_panel(_daily(days), [MonthlyObs("2020-01", 0.0), MonthlyObs("2020-02", 0.0)], 1)


def test_observation_validation():
    with pytest.raises(DataError):
        DailyObs(dt.date(2020, 1, 2), float("nan"))
    with pytest.raises(DataError):
        DailyObs(dt.date(2020, 1, 2), 0.1, x=-1.0)
    with pytest.raises(DataError):
        MonthlyObs("2020-01", float("inf"))


def test_lagged_returns_order_and_absolute_value(toy_panel):
    panel = timegrid.panel_from_arrays(toy_panel.dates[:4], [0.3, 0.7, -1.0, 2.0], toy_panel.months,
                                       toy_panel.mv, 24)
    assert np.array_equal(lagged_returns(panel, 4, 2), [2.0, 1.0])
    with pytest.raises(InsufficientHistoryError):
        lagged_returns(panel, 0, 1)


def test_lag_crosses_month_boundary(toy_panel):
    first_april = int(np.flatnonzero(toy_panel.month_of == toy_panel.month_of[-1])[0])
    lag = lagged_returns(toy_panel, first_april, 1)
    assert toy_panel.month_of[first_april - 1] == toy_panel.month_of[first_april] - 1
    assert lag[0] == abs(toy_panel.ret[first_april - 1])


@given(st.lists(st.integers(19, 23), min_size=1, max_size=8))
def test_index_pairs_round_trip(sizes):
    days, start = [], dt.date(2010, 1, 1)
    for k, n in enumerate(sizes):
        y, m = divmod(k, 12)
        days += [dt.date(2010 + y, m + 1, d) for d in range(1, n + 1)]
    months = np.arange(np.datetime64("2009-12"), np.datetime64("2009-12") + len(sizes) + 1)
    panel = timegrid.panel_from_arrays(days, np.zeros(len(days)), months, np.zeros(months.shape[0]), 1)
    pairs = panel.index_pairs()
    expected = np.concatenate([np.column_stack([np.arange(1, n + 1), np.full(n, k + 1)])
                               for k, n in enumerate(sizes)])
    assert np.array_equal(pairs, expected)
    for pos in range(0, len(panel), 7):
        assert panel.position_of(*pairs[pos]) == pos


@given(st.integers(0, 40), st.integers(0, 10))
def test_lagged_returns_matches_reversed_slice(pos, q):
    rng = np.random.default_rng(pos * 11 + q)
    days = month_days(2001, 3, 20) + month_days(2001, 4, 21)
    months = np.arange(np.datetime64("2001-02"), np.datetime64("2001-04"))
    panel = timegrid.panel_from_arrays(days, rng.standard_normal(41), months, [0.0, 1.0], 1)
    if pos < q:
        with pytest.raises(InsufficientHistoryError):
            lagged_returns(panel, pos, q)
    else:
        assert np.array_equal(lagged_returns(panel, pos, q), np.abs(panel.ret[pos - q:pos])[::-1])


def test_csv_round_trip_and_units(tmp_path, toy_panel):
    timegrid.write_daily_csv(toy_panel, tmp_path / "d.csv")
    timegrid.write_monthly_csv(toy_panel, tmp_path / "m.csv")
    back = timegrid.load_panel(tmp_path / "d.csv", tmp_path / "m.csv", 24)
    assert np.array_equal(back.ret, toy_panel.ret)
    assert np.array_equal(back.x, toy_panel.x)
    assert np.array_equal(back.month_of, toy_panel.month_of)
    dec = timegrid.read_daily_csv(tmp_path / "d.csv", unit="decimal")
    assert dec[0].ret == pytest.approx(100 * toy_panel.ret[0])


def test_csv_errors_carry_line_numbers(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("date,ret\n2020-01-02,0.1\n2020-01-03,abc\n", encoding="utf-8")
    with pytest.raises(DataError, match=":3:"):
        timegrid.read_daily_csv(p)
    p.write_text("day,ret\n", encoding="utf-8")
    with pytest.raises(DataError):
        timegrid.read_daily_csv(p)
