"""Scalar sentiment per (ticker, day): score files first, lexicon fallback.

Score files carry class probabilities from an offline headline scorer; the
lexicon gives a dependency-free fallback so the pipeline runs with nothing
but the market CSV.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .errors import (
    InvalidArgumentError,
    IoError,
    MalformedRowError,
    SimplexViolationError,
)
from .market_data import MarketSeries

SIMPLEX_TOLERANCE = 1e-3


@dataclass(frozen=True)
class SentimentRecord:
    """Class probabilities for one (ticker, day); score = p_pos - p_neg."""

    date: str
    ticker: str
    p_pos: float
    p_neu: float
    p_neg: float

    def __post_init__(self):
        for name in ("p_pos", "p_neu", "p_neg"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise SimplexViolationError(f"{name}={p} outside [0, 1]")
        total = self.p_pos + self.p_neu + self.p_neg
        if abs(total - 1.0) > 1e-6:
            raise SimplexViolationError(f"probabilities sum to {total}, not 1")

    @property
    def score(self) -> float:
        return self.p_pos - self.p_neg


def load_scores(path) -> dict[tuple[str, str], SentimentRecord]:
    """Read a `date,ticker,p_pos,p_neu,p_neg` CSV into a (ticker, date) map.

    Probability triples off the simplex by more than 1e-3 raise; smaller
    drift (serialization rounding) is renormalized. A duplicated (ticker,
    date) key keeps the last row.
    """
    path = Path(path)
    if not path.exists():
        raise IoError(f"no such file: {path}")
    out: dict[tuple[str, str], SentimentRecord] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"date", "ticker", "p_pos", "p_neu", "p_neg"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise MalformedRowError(0, f"header must contain {sorted(required)}")
        for idx, row in enumerate(reader, start=1):
            try:
                probs = [float(row["p_pos"]), float(row["p_neu"]), float(row["p_neg"])]
            except (TypeError, ValueError):
                raise MalformedRowError(idx, f"non-numeric probabilities in {row!r}") from None
            if not row.get("date") or not row.get("ticker"):
                raise MalformedRowError(idx, "blank date or ticker")
            total = sum(probs)
            if abs(total - 1.0) > SIMPLEX_TOLERANCE or min(probs) < -SIMPLEX_TOLERANCE:
                raise SimplexViolationError(
                    f"row {idx}: probabilities {probs} sum to {total}, off the simplex"
                )
            p_pos, p_neu, p_neg = (max(p, 0.0) / total for p in probs)
            key = (row["ticker"], row["date"])
            out[key] = SentimentRecord(row["date"], row["ticker"], p_pos, p_neu, p_neg)
    return out


# --- lexicon fallback --------------------------------------------------------


def _tokens(text: str) -> list[str]:
    cleaned = (re.sub(r"[^a-z0-9]", "", w) for w in text.lower().split())
    return [t for t in cleaned if t]


@dataclass(frozen=True)
class LexiconScorer:
    """Counts positive/negative word hits; an immediately preceding negation
    word flips a hit's sign."""

    positive: frozenset
    negative: frozenset
    negation: frozenset

    def __post_init__(self):
        overlap = (self.positive & self.negative) | (self.positive & self.negation) | (
            self.negative & self.negation
        )
        if overlap:
            raise InvalidArgumentError(f"lexicon sections overlap: {sorted(overlap)}")

    def score(self, headline: str) -> float:
        pos_hits = 0
        neg_hits = 0
        prev = None
        for tok in _tokens(headline):
            sign = 0
            if tok in self.positive:
                sign = 1
            elif tok in self.negative:
                sign = -1
            if sign and prev in self.negation:
                sign = -sign
            if sign > 0:
                pos_hits += 1
            elif sign < 0:
                neg_hits += 1
            prev = tok
        return (pos_hits - neg_hits) / max(1, pos_hits + neg_hits)

    @classmethod
    def from_file(cls, path) -> "LexiconScorer":
        path = Path(path)
        if not path.exists():
            raise IoError(f"no such file: {path}")
        return cls.from_text(path.read_text(encoding="utf-8"))

    @classmethod
    def from_text(cls, text: str) -> "LexiconScorer":
        sections: dict[str, set] = {"positive": set(), "negative": set(), "negation": set()}
        current = None
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1]
                if current not in sections:
                    raise InvalidArgumentError(f"unknown lexicon section {current!r}")
                continue
            if current is None:
                raise InvalidArgumentError(f"word {line!r} before any section header")
            sections[current].add(line.lower())
        return cls(
            frozenset(sections["positive"]),
            frozenset(sections["negative"]),
            frozenset(sections["negation"]),
        )


@lru_cache(maxsize=1)
def default_lexicon() -> LexiconScorer:
    text = resources.files("stockformer").joinpath("data/lexicon.txt").read_text(encoding="utf-8")
    return LexiconScorer.from_text(text)


def lexicon_score(headline: str, scorer: LexiconScorer | None = None) -> float:
    """Score in [-1, 1] from lexicon hits; empty or hit-free text scores 0."""
    return (scorer or default_lexicon()).score(headline)


def _derived_probs(score: float) -> tuple[float, float, float]:
    # consistent with score = p_pos - p_neg and a full simplex
    return (max(score, 0.0), 1.0 - abs(score), max(-score, 0.0))


def attach(
    series: MarketSeries,
    scores: dict[tuple[str, str], SentimentRecord] | None = None,
    fallback: LexiconScorer | None = None,
) -> MarketSeries:
    """Give every entry a sentiment value.

    Precedence: score-file record, then a sentiment already on the entry
    (e.g. from the CSV column), then the lexicon on the headline, then
    neutral 0.0.
    """
    fallback = fallback or default_lexicon()
    out = []
    for entry in series:
        record = scores.get((entry.ticker, entry.date)) if scores else None
        if record is not None:
            value = record.score
            probs = (record.p_pos, record.p_neu, record.p_neg)
        elif entry.sentiment is not None:
            value = entry.sentiment
            probs = entry.sentiment_probs or _derived_probs(value)
        elif entry.headline:
            value = fallback.score(entry.headline)
            probs = _derived_probs(value)
        else:
            value = 0.0
            probs = (0.0, 1.0, 0.0)
        out.append(replace(entry, sentiment=value, sentiment_probs=probs))
    return series.with_entries(out)
