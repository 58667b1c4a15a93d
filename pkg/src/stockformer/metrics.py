"""Evaluation metrics over aligned (truth, prediction, prior-truth) series."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateTruthError,
    LengthMismatchError,
    NoValidPairsError,
)

REPORT_COLUMNS = ("model", "lag", "seed", "n_samples", "mse", "r2", "auc", "dir_acc")


@dataclass(frozen=True)
class EvalSeries:
    """Test-period truth x, prediction y, and prior (previous day's true open)."""

    truth: np.ndarray
    pred: np.ndarray
    prior: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "truth", np.asarray(self.truth, dtype=np.float64))
        object.__setattr__(self, "pred", np.asarray(self.pred, dtype=np.float64))
        object.__setattr__(self, "prior", np.asarray(self.prior, dtype=np.float64))
        n = self.truth.size
        if n < 1 or self.pred.size != n or self.prior.size != n:
            raise LengthMismatchError(
                f"truth/pred/prior lengths {self.truth.size}/{self.pred.size}/{self.prior.size}"
            )


@dataclass(frozen=True)
class EvalReport:
    model: str
    lag: int
    seed: int
    n_samples: int
    mse: float
    r2: float
    auc: float
    dir_acc: float

    def __post_init__(self):
        if not 0.0 <= self.auc <= 1.0:
            raise ValueError(f"auc {self.auc} outside [0, 1]")
        if not 0.0 <= self.dir_acc <= 1.0:
            raise ValueError(f"dir_acc {self.dir_acc} outside [0, 1]")

    def csv_row(self) -> list[str]:
        return [
            self.model,
            str(self.lag),
            str(self.seed),
            str(self.n_samples),
            repr(self.mse),
            repr(self.r2),
            repr(self.auc),
            repr(self.dir_acc),
        ]


def _aligned(x, y, name: str) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size != y.size or x.size == 0:
        raise LengthMismatchError(f"{name}: lengths {x.size} and {y.size}")
    return x, y


def mse(x, y) -> float:
    """Mean squared difference between truth and prediction."""
    x, y = _aligned(x, y, "mse")
    return float(np.mean((x - y) ** 2))


def r2(x, y) -> float:
    """1 - residual sum of squares over total (squared) sum of squares."""
    x, y = _aligned(x, y, "r2")
    if x.size < 2:
        raise LengthMismatchError(f"r2 needs >= 2 points, got {x.size}")
    denom = float(np.sum((x - x.mean()) ** 2))
    if denom == 0.0:
        raise DegenerateTruthError("ground truth is constant; r2 undefined")
    return 1.0 - float(np.sum((x - y) ** 2)) / denom


def regression_auc(x, y) -> float:
    """Probability the model ranks a higher-truth day above a lower-truth one.

    Over all ordered pairs with x_a > x_b: 1 if y_a > y_b, 0.5 on ties,
    else 0. Ground-truth ties contribute no pairs.
    """
    x, y = _aligned(x, y, "regression_auc")
    higher = x[:, None] > x[None, :]
    pairs = int(higher.sum())
    if pairs == 0:
        raise NoValidPairsError("no pair with strictly larger ground truth")
    ygt = (y[:, None] > y[None, :])[higher]
    yeq = (y[:, None] == y[None, :])[higher]
    return float((ygt.sum() + 0.5 * yeq.sum()) / pairs)


def directional_accuracy(x, y, prior) -> float:
    """Fraction of days where truth and prediction land on the same side of
    the previous day's true open (the >= side includes equality)."""
    x, y = _aligned(x, y, "directional_accuracy")
    prior = np.asarray(prior, dtype=np.float64)
    if prior.size != x.size:
        raise LengthMismatchError(f"directional_accuracy: prior length {prior.size} vs {x.size}")
    up = (x >= prior) & (y >= prior)
    down = (x < prior) & (y < prior)
    return float(np.mean(up | down))


def evaluate(series: EvalSeries, model: str, lag: int, seed: int) -> EvalReport:
    """All four metrics for one (model, lag) run."""
    return EvalReport(
        model=model,
        lag=lag,
        seed=seed,
        n_samples=int(series.truth.size),
        mse=mse(series.truth, series.pred),
        r2=r2(series.truth, series.pred),
        auc=regression_auc(series.truth, series.pred),
        dir_acc=directional_accuracy(series.truth, series.pred, series.prior),
    )
