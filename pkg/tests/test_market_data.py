import datetime as dt
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stockformer.errors import (
    EmptyFileError,
    InvalidArgumentError,
    InvariantViolationError,
    IoError,
    MissingColumnError,
)
from stockformer.market_data import (
    MarketEntry,
    MarketSeries,
    align_business_days,
    load_csv,
    load_csv_report,
    synth_series,
    write_csv,
)
from stockformer.sentiment import lexicon_score

GOOD_HEADER = "date,ticker,open,high,low,close,headline,sentiment,rsi,ema,sma,macd\n"


def _write(tmp_path, body, header=GOOD_HEADER):
    p = tmp_path / "data.csv"
    p.write_text(header + body)
    return p


def _row(date, ticker, o, h, l, c):
    return f"{date},{ticker},{o},{h},{l},{c},,,,,,\n"


def test_two_tickers_three_days(tmp_path):
    body = "".join(
        _row(f"2024-01-0{d}", t, 10, 11, 9, 10) for t in ("AAA", "BBB") for d in (1, 2, 3)
    )
    series = load_csv(_write(tmp_path, body))
    assert [s.ticker for s in series] == ["AAA", "BBB"]
    assert [len(s) for s in series] == [3, 3]


def test_high_below_low_rejected_naming_row(tmp_path):
    rows = [_row(f"2024-01-{d:02d}", "AAA", 10, 11, 9, 10) for d in range(1, 21)]
    rows.insert(4, _row("2024-02-01", "BAD", 10, 9, 11, 10))  # high < low
    series, report = load_csv_report(_write(tmp_path, "".join(rows)))
    assert report.parsed == 21 and report.loaded == 20
    (idx, err), = report.rejects
    assert idx == 5 and isinstance(err, InvariantViolationError)
    assert "row 5" in str(err)


def test_reject_fraction_over_ten_percent_fails_file(tmp_path):
    body = _row("2024-01-01", "AAA", 10, 11, 9, 10) + _row("2024-01-02", "AAA", 10, 9, 11, 10)
    with pytest.raises(EmptyFileError):
        load_csv(_write(tmp_path, body))


def test_row_accounting_identity(tmp_path):
    rows = [_row(f"2024-01-{d:02d}", "AAA", 10, 11, 9, 10) for d in range(1, 21)]
    rows.append(_row("2024-02-01", "AAA", -5, 11, 9, 10))
    rows.append("2024-02-02,AAA,oops,11,9,10,,,,,,\n")
    _, report = load_csv_report(_write(tmp_path, "".join(rows)))
    assert report.parsed == report.loaded + len(report.rejects) == 22


def test_missing_column(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("date,ticker,open,high,low\n2024-01-01,A,1,2,0.5\n")
    with pytest.raises(MissingColumnError):
        load_csv(p)


def test_empty_file(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text(GOOD_HEADER)
    with pytest.raises(EmptyFileError):
        load_csv(p)


def test_missing_file(tmp_path):
    with pytest.raises(IoError):
        load_csv(tmp_path / "absent.csv")


def test_schema_renames_columns(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("Day,Symbol,open,high,low,close\n2024-01-01,A,10,11,9,10\n")
    series = load_csv(p, schema={"date": "Day", "ticker": "Symbol"})
    assert series[0].ticker == "A" and series[0][0].date == "2024-01-01"


@pytest.mark.parametrize(
    "bad_row",
    [
        _row("2024-02-01", "AAA", -1, 11, 9, 10),  # negative price
        _row("2023-12-31", "AAA", 10, 11, 9, 10),  # out of order
        _row("2024-01-20", "AAA", 10, 11, 9, 10),  # duplicate date
        _row("2024-02-01", "AAA", 12, 11, 9, 10),  # open above high
        "2024-02-01,AAA,1,2,0.5,NaN,,,,,,\n",  # non-finite price
        "not-a-date,AAA,10,11,9,10,,,,,,\n",
    ],
)
def test_adversarial_rows_rejected(tmp_path, bad_row):
    rows = [_row(f"2024-01-{d:02d}", "AAA", 10, 11, 9, 10) for d in range(1, 21)]
    rows.append(bad_row)
    series, report = load_csv_report(_write(tmp_path, "".join(rows)))
    assert report.loaded == 20 and len(report.rejects) == 1
    assert len(series[0]) == 20


# --- round trip --------------------------------------------------------------

_price = st.floats(min_value=0.01, max_value=1e6, allow_nan=False, allow_infinity=False)
_text = st.text(
    alphabet=st.characters(whitelist_categories=("L", "N", "P", "Zs")), min_size=1, max_size=40
).filter(lambda s: s.strip())


@st.composite
def market_series(draw):
    ticker = draw(st.text(alphabet="ABCDEFGH", min_size=1, max_size=4))
    n = draw(st.integers(min_value=1, max_value=8))
    start = dt.date(2022, 1, 3)
    entries = []
    for i in range(n):
        a, b = sorted([draw(_price), draw(_price)])
        span = b - a
        o = a + draw(st.floats(0, 1)) * span
        c = a + draw(st.floats(0, 1)) * span
        entries.append(
            MarketEntry(
                date=(start + dt.timedelta(days=i)).isoformat(),
                ticker=ticker,
                open=o,
                high=b,
                low=a,
                close=c,
                headline=draw(st.none() | _text),
                sentiment=draw(st.none() | st.floats(-1, 1, allow_nan=False)),
                rsi=draw(st.none() | st.floats(0, 100, allow_nan=False)),
            )
        )
    return MarketSeries(ticker, tuple(entries))


@settings(max_examples=40, deadline=None)
@given(series=market_series())
def test_write_load_round_trip(tmp_path_factory, series):
    path = tmp_path_factory.mktemp("rt") / "series.csv"
    write_csv([series], path)
    loaded = load_csv(path)
    assert len(loaded) == 1
    assert loaded[0] == series


def test_round_trip_headline_with_commas_and_quotes(tmp_path):
    entry = MarketEntry(
        date="2024-01-02",
        ticker="AAA",
        open=10.0,
        high=11.0,
        low=9.5,
        close=10.5,
        headline='board says "steady, as planned" despite chatter',
    )
    series = MarketSeries("AAA", (entry,))
    path = tmp_path / "q.csv"
    write_csv([series], path)
    assert load_csv(path)[0] == series


# --- synthetic generator ------------------------------------------------------


def test_synth_single_day():
    s = synth_series("T", days=1, seed=7)
    assert len(s) == 1
    assert s[0].low > 0 and s[0].high >= s[0].low


def test_synth_deterministic():
    a = synth_series("T", days=120, seed=9, regime="mix")
    b = synth_series("T", days=120, seed=9, regime="mix")
    assert a == b


def test_synth_seed_and_ticker_change_series():
    base = synth_series("T", days=30, seed=1)
    assert synth_series("T", days=30, seed=2) != base
    assert synth_series("U", days=30, seed=1).entries[0].open != base.entries[0].open


def test_synth_invalid_days():
    with pytest.raises(InvalidArgumentError):
        synth_series("T", days=0, seed=1)
    with pytest.raises(InvalidArgumentError):
        synth_series("T", days=5, seed=1, regime="sideways")


def test_synth_entries_satisfy_invariants():
    # construction would raise otherwise; double-check the order contract too
    s = synth_series("T", days=300, seed=4, regime="mean_revert")
    dates = [e.date for e in s]
    assert dates == sorted(dates) and len(set(dates)) == len(dates)


def test_synth_sentiment_correlates_with_next_day_return():
    # scalar brute-force correlation pass, no numpy helpers
    s = synth_series("T", days=500, seed=3, regime="trend")
    scores = [lexicon_score(e.headline) for e in s.entries[:-1]]
    rets = [
        math.log(s.entries[t + 1].open / s.entries[t].open) for t in range(len(s) - 1)
    ]
    n = len(scores)
    ms = sum(scores) / n
    mr = sum(rets) / n
    cov = sum((a - ms) * (b - mr) for a, b in zip(scores, rets)) / n
    vs = sum((a - ms) ** 2 for a in scores) / n
    vr = sum((b - mr) ** 2 for b in rets) / n
    corr = cov / math.sqrt(vs * vr)
    assert corr > 0.3


# --- alignment ---------------------------------------------------------------


def _weekday_entries(start: dt.date, calendar_days: int):
    entries = []
    for i in range(calendar_days):
        day = start + dt.timedelta(days=i)
        if day.weekday() < 5:
            entries.append(
                MarketEntry(date=day.isoformat(), ticker="A", open=10, high=11, low=9, close=10)
            )
    return entries


def test_friday_monday_adjacent():
    series = MarketSeries("A", tuple(_weekday_entries(dt.date(2024, 1, 5), 4)))  # Fri..Mon
    aligned = align_business_days(series)
    assert [e.date for e in aligned] == ["2024-01-05", "2024-01-08"]


def test_ten_calendar_days_two_weekend_gaps():
    start = dt.date(2024, 1, 1)  # Monday; Jan 6/7 are the weekend
    expected = sum(1 for i in range(10) if (start + dt.timedelta(days=i)).weekday() < 5)
    assert expected == 8  # calendar oracle
    series = MarketSeries("A", tuple(_weekday_entries(start, 10)))
    assert len(align_business_days(series)) == 8


def test_midweek_gap_stays_contiguous():
    entries = _weekday_entries(dt.date(2024, 1, 1), 5)
    del entries[2]  # drop Wednesday
    aligned = align_business_days(MarketSeries("A", tuple(entries)))
    assert [e.date for e in aligned] == ["2024-01-01", "2024-01-02", "2024-01-04", "2024-01-05"]


def test_align_rejects_empty():
    with pytest.raises(InvalidArgumentError):
        align_business_days(MarketSeries("A", ()))


# --- paper-scale file ----------------------------------------------------------


def test_paper_scale_file_round_trips_clean(tmp_path):
    tickers = ["FB", "AMZN", "AAPL", "NFLX", "GOOG"]
    regimes = ["trend", "mean_revert", "mix", "trend", "mix"]
    all_series = [
        synth_series(t, days=740, seed=11, regime=r) for t, r in zip(tickers, regimes)
    ]
    path = tmp_path / "faang.csv"
    write_csv(all_series, path)
    loaded, report = load_csv_report(path)
    assert report.parsed == 3700 and not report.rejects
    for s in loaded:
        assert s.entries[0].date >= "2019-03-18"
        assert s.entries[-1].date <= "2022-02-18"
