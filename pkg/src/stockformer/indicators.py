"""Technical indicators (RSI, EMA, SMA, MACD) and per-ticker Z-scoring.

Indicator values at index t are functions of closes[0..t] only, so adding
future rows never changes past annotations. Normalization statistics come
from the chronologically first training fraction of each series; the
population standard deviation is used throughout so independent oracles
agree exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateFeatureError,
    InsufficientHistoryError,
    InvalidArgumentError,
    IoError,
    UnknownKeyError,
)
from .market_data import MarketSeries

PRICE_FEATURES = ("open", "high", "low", "close")
INDICATOR_FEATURES = ("rsi", "ema", "sma", "macd")
DEFAULT_NORM_FEATURES = PRICE_FEATURES + INDICATOR_FEATURES


@dataclass(frozen=True)
class IndicatorConfig:
    rsi_window: int = 50
    sma_window: int = 50
    ema_window: int = 50
    macd_fast: int = 12
    macd_slow: int = 26
    trust_precomputed: bool = False

    def __post_init__(self):
        for name in ("rsi_window", "sma_window", "ema_window", "macd_fast", "macd_slow"):
            if getattr(self, name) < 1:
                raise InvalidArgumentError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.macd_fast >= self.macd_slow:
            raise InvalidArgumentError(
                f"macd_fast ({self.macd_fast}) must be < macd_slow ({self.macd_slow})"
            )

    @property
    def warmup(self) -> int:
        """Entries before this index stay unannotated."""
        return max(self.rsi_window + 1, self.sma_window, self.macd_slow)


def rsi(closes, window: int) -> float:
    """Relative strength from the trailing ``window`` close-to-close changes.

    Flat windows (no gains, no losses) return the neutral 50; windows with
    no losses return 100 and with no gains return 0, since the ratio form
    divides by zero there.
    """
    if window < 1:
        raise InvalidArgumentError(f"window must be >= 1, got {window}")
    closes = np.asarray(closes, dtype=np.float64)
    if closes.size < window + 1:
        raise InsufficientHistoryError(
            f"rsi needs {window + 1} closes ({window} changes), got {closes.size}"
        )
    deltas = np.diff(closes[-(window + 1):])
    gains = deltas[deltas > 0]
    losses = -deltas[deltas < 0]
    if losses.size == 0 and gains.size == 0:
        return 50.0
    if losses.size == 0:
        return 100.0
    if gains.size == 0:
        return 0.0
    rs = gains.mean() / losses.mean()
    return 100.0 - 100.0 / (1.0 + rs)


def ema_series(closes, period: int) -> list[float]:
    """Exponential moving average seeded with the first close."""
    if period < 1:
        raise InvalidArgumentError(f"period must be >= 1, got {period}")
    closes = list(closes)
    if not closes:
        raise InvalidArgumentError("ema_series needs at least one close")
    j = 2.0 / (period + 1)
    out = [float(closes[0])]
    for c in closes[1:]:
        out.append(j * float(c) + (1.0 - j) * out[-1])
    return out


def sma(closes, window: int) -> float:
    """Arithmetic mean of the trailing ``window`` closes."""
    if window < 1:
        raise InvalidArgumentError(f"window must be >= 1, got {window}")
    closes = np.asarray(closes, dtype=np.float64)
    if closes.size < window:
        raise InsufficientHistoryError(f"sma needs {window} closes, got {closes.size}")
    return float(closes[-window:].mean())


def macd(closes, fast: int = 12, slow: int = 26) -> float:
    """Fast EMA minus slow EMA, both seeded from the full history."""
    if fast >= slow:
        raise InvalidArgumentError(f"fast ({fast}) must be < slow ({slow})")
    return ema_series(closes, fast)[-1] - ema_series(closes, slow)[-1]


def annotate(series: MarketSeries, cfg: IndicatorConfig | None = None) -> MarketSeries:
    """Populate all four indicators on every entry past the warm-up index."""
    cfg = cfg or IndicatorConfig()
    warmup = cfg.warmup
    if len(series) <= warmup:
        raise InsufficientHistoryError(
            f"series {series.ticker!r} has {len(series)} entries, warm-up needs more than {warmup}"
        )
    closes = [e.close for e in series]
    ema_full = ema_series(closes, cfg.ema_window)
    ema_fast = ema_series(closes, cfg.macd_fast)
    ema_slow = ema_series(closes, cfg.macd_slow)
    cum = np.concatenate([[0.0], np.cumsum([float(c) for c in closes])])

    out = []
    for t, entry in enumerate(series):
        if cfg.trust_precomputed and entry.has_indicators:
            out.append(entry)
            continue
        if t < warmup:
            out.append(entry)
            continue
        window_mean = (cum[t + 1] - cum[t + 1 - cfg.sma_window]) / cfg.sma_window
        out.append(
            replace(
                entry,
                rsi=rsi(closes[: t + 1], cfg.rsi_window),
                ema=ema_full[t],
                sma=float(window_mean),
                macd=ema_fast[t] - ema_slow[t],
            )
        )
    return series.with_entries(out)


# --- normalization ----------------------------------------------------------


@dataclass
class NormStats:
    """Per-(ticker, feature) mean and population std fit on training rows."""

    stats: dict[tuple[str, str], tuple[float, float]] = field(default_factory=dict)

    @property
    def features(self) -> tuple[str, ...]:
        return tuple(sorted({f for _, f in self.stats}))

    def mean_std(self, ticker: str, feature: str) -> tuple[float, float]:
        try:
            return self.stats[(ticker, feature)]
        except KeyError:
            raise UnknownKeyError(f"no normalization stats for ({ticker!r}, {feature!r})") from None

    def to_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["ticker", "feature", "mean", "std"])
            for (ticker, feat) in sorted(self.stats):
                mean, std = self.stats[(ticker, feat)]
                writer.writerow([ticker, feat, repr(mean), repr(std)])

    @classmethod
    def from_csv(cls, path) -> "NormStats":
        path = Path(path)
        if not path.exists():
            raise IoError(f"no such file: {path}")
        stats = {}
        with path.open(newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                stats[(row["ticker"], row["feature"])] = (float(row["mean"]), float(row["std"]))
        return cls(stats)


def fit_norm(
    series_list: list[MarketSeries],
    features: tuple[str, ...] = DEFAULT_NORM_FEATURES,
    split: float = 0.8,
) -> NormStats:
    """Fit per-ticker stats on the chronologically first ``split`` fraction.

    Only rows where the feature is present contribute (indicator columns are
    absent during warm-up). Constant training slices are an error rather
    than a silent divide-by-zero downstream.
    """
    if not 0.0 < split <= 1.0:
        raise InvalidArgumentError(f"split must be in (0, 1], got {split}")
    stats = {}
    for series in series_list:
        n_train = int(split * len(series))
        for feat in features:
            values = [getattr(e, feat) for e in series.entries[:n_train]]
            values = np.array([v for v in values if v is not None], dtype=np.float64)
            if values.size < 2 or np.all(values == values[0]):
                raise DegenerateFeatureError(
                    f"feature {feat!r} of {series.ticker!r} has < 2 distinct training values"
                )
            mean = float(values.mean())
            std = float(values.std())  # population form
            stats[(series.ticker, feat)] = (mean, std)
    return NormStats(stats)


@dataclass(frozen=True)
class FeatureFrame:
    """A series after normalization: aligned columns, no entry invariants.

    Z-scored prices are signed and unordered, so they cannot live in
    MarketEntry. Columns are full-length float arrays with NaN where the
    underlying value was absent (warm-up rows).
    """

    ticker: str
    dates: tuple[str, ...]
    columns: dict[str, np.ndarray]

    def __len__(self) -> int:
        return len(self.dates)

    def matrix(self, features: tuple[str, ...]) -> np.ndarray:
        return np.stack([self.columns[f] for f in features], axis=1)

    def first_complete_index(self, features: tuple[str, ...]) -> int:
        """First index from which every requested column is present through the end."""
        m = self.matrix(features)
        complete = ~np.isnan(m).any(axis=1)
        if not complete.any():
            raise InsufficientHistoryError(
                f"{self.ticker!r}: no row has all of {features}"
            )
        first = int(np.argmax(complete))
        if not complete[first:].all():
            raise InsufficientHistoryError(
                f"{self.ticker!r}: columns {features} have gaps after index {first}"
            )
        return first


def apply_norm(
    series: MarketSeries,
    stats: NormStats,
    features: tuple[str, ...] | None = None,
) -> FeatureFrame:
    """Z-score the features covered by ``stats``; pass the rest through raw.

    Features without fitted stats (sentiment is the usual case: already
    bounded in [-1, 1]) are copied unscaled.
    """
    features = tuple(features) if features is not None else stats.features
    normalized = set(stats.features)
    columns: dict[str, np.ndarray] = {}
    for feat in features:
        raw = np.array(
            [np.nan if getattr(e, feat) is None else float(getattr(e, feat)) for e in series],
            dtype=np.float64,
        )
        if feat in normalized:
            mean, std = stats.mean_std(series.ticker, feat)
            columns[feat] = (raw - mean) / std
        else:
            columns[feat] = raw
    return FeatureFrame(series.ticker, tuple(e.date for e in series), columns)


def invert_norm(value: float, ticker: str, feature: str, stats: NormStats) -> float:
    """Undo apply_norm for one value; exact inverse up to rounding."""
    mean, std = stats.mean_std(ticker, feature)
    return value * std + mean
