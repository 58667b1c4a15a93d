"""Daily per-ticker market rows: CSV ingestion, validation, synthesis.

Dates are ISO-8601 strings compared lexicographically. Business-day
structure is positional: downstream lag windows count consecutive entries,
never calendar distance, so weekend and holiday gaps simply do not appear
in the index space.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    EmptyFileError,
    InvalidArgumentError,
    InvariantViolationError,
    IoError,
    MalformedRowError,
    MissingColumnError,
)
from .rng import Rng, derive_seed

CSV_COLUMNS = (
    "date",
    "ticker",
    "open",
    "high",
    "low",
    "close",
    "headline",
    "sentiment",
    "rsi",
    "ema",
    "sma",
    "macd",
)
REQUIRED_COLUMNS = CSV_COLUMNS[:6]
INDICATOR_FIELDS = ("rsi", "ema", "sma", "macd")

# A load aborts when more than this fraction of data rows reject.
MAX_REJECT_FRACTION = 0.10


def _check_date(value: str) -> str:
    try:
        dt.date.fromisoformat(value)
    except ValueError:
        raise InvariantViolationError(f"date {value!r} is not YYYY-MM-DD") from None
    return value


@dataclass(frozen=True)
class MarketEntry:
    """One ticker-day row; prices raw scale, indicators/sentiment optional."""

    date: str
    ticker: str
    open: float
    high: float
    low: float
    close: float
    headline: str | None = None
    sentiment: float | None = None
    sentiment_probs: tuple[float, float, float] | None = None
    rsi: float | None = None
    ema: float | None = None
    sma: float | None = None
    macd: float | None = None

    def __post_init__(self):
        _check_date(self.date)
        if not self.ticker:
            raise InvariantViolationError("empty ticker")
        for name in ("open", "high", "low", "close"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and value > 0 and math.isfinite(value)):
                raise InvariantViolationError(f"{name}={value!r} must be a positive finite price")
        if self.low > self.high:
            raise InvariantViolationError(f"low {self.low} exceeds high {self.high}")
        if not (self.low <= self.open <= self.high):
            raise InvariantViolationError(f"open {self.open} outside [low, high]=[{self.low}, {self.high}]")
        if not (self.low <= self.close <= self.high):
            raise InvariantViolationError(f"close {self.close} outside [low, high]=[{self.low}, {self.high}]")
        if self.sentiment is not None and not -1.0 <= self.sentiment <= 1.0:
            raise InvariantViolationError(f"sentiment {self.sentiment} outside [-1, 1]")

    @property
    def has_indicators(self) -> bool:
        return all(getattr(self, name) is not None for name in INDICATOR_FIELDS)

    # channel views used when sentiment enters the model as three features
    @property
    def p_pos(self) -> float | None:
        return self.sentiment_probs[0] if self.sentiment_probs else None

    @property
    def p_neu(self) -> float | None:
        return self.sentiment_probs[1] if self.sentiment_probs else None

    @property
    def p_neg(self) -> float | None:
        return self.sentiment_probs[2] if self.sentiment_probs else None


@dataclass(frozen=True)
class MarketSeries:
    """Entries for one ticker, strictly ascending by date."""

    ticker: str
    entries: tuple[MarketEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        for e in self.entries:
            if e.ticker != self.ticker:
                raise InvariantViolationError(f"entry ticker {e.ticker!r} in series {self.ticker!r}")
        for prev, cur in zip(self.entries, self.entries[1:]):
            if cur.date <= prev.date:
                raise InvariantViolationError(
                    f"dates not strictly increasing: {prev.date} then {cur.date}"
                )

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i) -> MarketEntry:
        return self.entries[i]

    def with_entries(self, entries) -> "MarketSeries":
        return MarketSeries(self.ticker, tuple(entries))


@dataclass
class LoadReport:
    """Row accounting for one load: parsed == loaded + len(rejects)."""

    parsed: int = 0
    loaded: int = 0
    rejects: list[tuple[int, Exception]] = field(default_factory=list)


def _parse_optional_float(raw: str | None, column: str, row_index: int) -> float | None:
    if raw is None or raw.strip() == "":
        return None
    try:
        return float(raw)
    except ValueError:
        raise MalformedRowError(row_index, f"column {column!r}: {raw!r} is not a number") from None


def load_csv_report(path, schema: dict[str, str] | None = None) -> tuple[list[MarketSeries], LoadReport]:
    """Load and validate rows, returning per-ticker series plus accounting.

    ``schema`` maps canonical column names to the file's actual header names.
    Rows that fail to parse or violate entry invariants are rejected and
    reported; the whole file is rejected when more than 10% of rows fail.
    Within a ticker, rows must already be in chronological order; silent
    reordering could mask corrupted input.
    """
    path = Path(path)
    if not path.exists():
        raise IoError(f"no such file: {path}")
    schema = schema or {}
    colname = {canon: schema.get(canon, canon) for canon in CSV_COLUMNS}

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise EmptyFileError(f"{path}: no header row")
        missing = [colname[c] for c in REQUIRED_COLUMNS if colname[c] not in reader.fieldnames]
        if missing:
            raise MissingColumnError(f"{path}: missing required columns {missing}")

        report = LoadReport()
        per_ticker: dict[str, list[MarketEntry]] = {}
        for row_index, row in enumerate(reader, start=1):
            report.parsed += 1
            try:
                entry = _parse_row(row, colname, row_index)
                bucket = per_ticker.setdefault(entry.ticker, [])
                if bucket and entry.date <= bucket[-1].date:
                    raise InvariantViolationError(
                        f"ticker {entry.ticker}: date {entry.date} not after {bucket[-1].date}",
                        row_index=row_index,
                    )
                bucket.append(entry)
                report.loaded += 1
            except (MalformedRowError, InvariantViolationError) as exc:
                report.rejects.append((row_index, exc))

    if report.parsed == 0:
        raise EmptyFileError(f"{path}: no data rows")
    if len(report.rejects) > MAX_REJECT_FRACTION * report.parsed:
        first = "; ".join(str(e) for _, e in report.rejects[:3])
        raise EmptyFileError(
            f"{path}: {len(report.rejects)}/{report.parsed} rows rejected (first: {first})"
        )
    series = [MarketSeries(t, tuple(per_ticker[t])) for t in sorted(per_ticker)]
    return series, report


def load_csv(path, schema: dict[str, str] | None = None) -> list[MarketSeries]:
    return load_csv_report(path, schema)[0]


def _parse_row(row: dict, colname: dict[str, str], row_index: int) -> MarketEntry:
    def cell(canon: str) -> str | None:
        return row.get(colname[canon])

    for canon in REQUIRED_COLUMNS:
        if cell(canon) is None or cell(canon).strip() == "":
            raise MalformedRowError(row_index, f"blank required column {colname[canon]!r}")

    try:
        entry = MarketEntry(
            date=cell("date").strip(),
            ticker=cell("ticker").strip(),
            open=_parse_optional_float(cell("open"), "open", row_index),
            high=_parse_optional_float(cell("high"), "high", row_index),
            low=_parse_optional_float(cell("low"), "low", row_index),
            close=_parse_optional_float(cell("close"), "close", row_index),
            headline=(cell("headline") or None),
            sentiment=_parse_optional_float(cell("sentiment"), "sentiment", row_index),
            rsi=_parse_optional_float(cell("rsi"), "rsi", row_index),
            ema=_parse_optional_float(cell("ema"), "ema", row_index),
            sma=_parse_optional_float(cell("sma"), "sma", row_index),
            macd=_parse_optional_float(cell("macd"), "macd", row_index),
        )
    except InvariantViolationError as exc:
        raise InvariantViolationError(exc.reason, row_index=row_index) from None
    return entry


def write_csv(series_list: list[MarketSeries], path) -> None:
    """Write series in the canonical schema; round-trips through load_csv."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    def fmt(value) -> str:
        return "" if value is None else repr(float(value))

    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for series in series_list:
            for e in series:
                writer.writerow(
                    [
                        e.date,
                        e.ticker,
                        fmt(e.open),
                        fmt(e.high),
                        fmt(e.low),
                        fmt(e.close),
                        e.headline or "",
                        fmt(e.sentiment),
                        fmt(e.rsi),
                        fmt(e.ema),
                        fmt(e.sma),
                        fmt(e.macd),
                    ]
                )


def align_business_days(series: MarketSeries) -> MarketSeries:
    """Re-assert positional indexing over trading days.

    Gaps (weekends, holidays, missing rows) stay absent; consecutive entries
    are adjacent in index space. Construction already enforces the date
    ordering, so this is a validation point, not a transformation.
    """
    if len(series) == 0:
        raise InvalidArgumentError(f"series {series.ticker!r} is empty")
    return series


# --- synthetic data ---------------------------------------------------------

REGIMES = ("trend", "mean_revert", "mix")

# Headline templates; the marked words must stay in the shipped lexicon so
# the generated sentiment signal is recoverable by the fallback scorer.
_POSITIVE_HEADLINES = (
    "{t} profits surge as growth beats expectations",
    "{t} rallies on strong earnings and upbeat outlook",
    "record quarter lifts {t} as demand soars",
)
_NEGATIVE_HEADLINES = (
    "{t} shares plunge after weak results and losses",
    "{t} slumps as outlook cut deepens selloff fears",
    "lawsuit risk drags {t} down amid declining sales",
)
_NEUTRAL_HEADLINES = (
    "{t} holds annual meeting with shareholders",
    "{t} schedules quarterly report for next month",
    "analysts publish updated coverage of {t}",
)

_INTRADAY_VOL = 0.012
_GAP_VOL = 0.006
_SENTIMENT_IMPACT = 0.012  # log-return shift per unit of headline polarity
_RANGE_VOL = 0.004


def _business_days(start: dt.date, count: int) -> list[str]:
    days = []
    cur = start
    while len(days) < count:
        if cur.weekday() < 5:
            days.append(cur.isoformat())
        cur += dt.timedelta(days=1)
    return days


def synth_series(
    ticker: str,
    days: int,
    seed: int,
    regime: str = "mix",
    start_date: str = "2019-03-18",
) -> MarketSeries:
    """Deterministic geometric-random-walk series with signal-bearing headlines.

    Each day carries a headline whose lexicon polarity (-1, 0, +1) shifts the
    overnight gap into the next open, so next-day open-to-open returns
    correlate with the headline score. Pure function of its arguments.
    """
    if days < 1:
        raise InvalidArgumentError(f"days must be >= 1, got {days}")
    if regime not in REGIMES:
        raise InvalidArgumentError(f"regime must be one of {REGIMES}, got {regime!r}")

    rng = Rng(derive_seed(seed, zlib.crc32(ticker.encode("utf-8"))))
    base_price = 20.0 + 380.0 * rng.uniform()
    polarity = rng.integers(-1, 2, days)
    z_intra = rng.normal(days)
    z_gap = rng.normal(days)
    z_hi = np.abs(rng.normal(days))
    z_lo = np.abs(rng.normal(days))
    pick = rng.integers(0, 3, days)

    log_open = math.log(base_price)
    dates = _business_days(dt.date.fromisoformat(start_date), days)
    entries = []
    for t in range(days):
        if regime == "trend":
            drift = 0.0008
        elif regime == "mean_revert":
            drift = -0.05 * (log_open - math.log(base_price))
        else:  # mix: alternating trending and reverting thirds
            phase = (t // 125) % 3
            drift = (0.0010, -0.03 * (log_open - math.log(base_price)), -0.0010)[phase]
            if phase == 1:
                drift = max(-0.02, min(0.02, drift))

        open_px = math.exp(log_open)
        intraday = _INTRADAY_VOL * z_intra[t]
        close_px = open_px * math.exp(intraday)
        hi = max(open_px, close_px) * math.exp(_RANGE_VOL * z_hi[t])
        lo = min(open_px, close_px) * math.exp(-_RANGE_VOL * z_lo[t])

        p = int(polarity[t])
        pool = (_NEUTRAL_HEADLINES, _POSITIVE_HEADLINES, _NEGATIVE_HEADLINES)[p]
        headline = pool[int(pick[t])].format(t=ticker)

        entries.append(
            MarketEntry(
                date=dates[t],
                ticker=ticker,
                open=open_px,
                high=hi,
                low=lo,
                close=close_px,
                headline=headline,
            )
        )

        gap = drift + _SENTIMENT_IMPACT * p + _GAP_VOL * z_gap[t]
        log_open = math.log(close_px) + gap

    return MarketSeries(ticker, tuple(entries))


def replace_entry(entry: MarketEntry, **changes) -> MarketEntry:
    return replace(entry, **changes)
