"""Model hyperparameters and the supervised window sample."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import InvalidArgumentError, ShapeMismatchError


@dataclass(frozen=True)
class ModelConfig:
    lag: int
    feature_dim: int = 9  # 4 prices + 4 indicators + 1 sentiment
    d_model: int = 80
    heads: int = 8
    enc_layers: int = 6
    dec_layers: int = 6
    dropout: float = 0.1
    ffn_dim: int | None = None  # defaults to 4 * d_model
    pe_n: float = 10_000.0
    lstm_hidden: int = 10  # per direction
    lstm_layers: int = 2
    lstm_bidirectional: bool = True
    seed: int = 0
    use_layer_norm: bool = True
    per_day_embedder: bool = False

    def __post_init__(self):
        if self.lag < 1:
            raise InvalidArgumentError(f"lag must be >= 1, got {self.lag}")
        if self.d_model % self.heads != 0:
            raise InvalidArgumentError(
                f"d_model ({self.d_model}) must be divisible by heads ({self.heads})"
            )
        if self.d_model % 2 != 0:
            raise InvalidArgumentError(f"d_model must be even for positional encoding, got {self.d_model}")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidArgumentError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.feature_dim < 1 or self.lstm_hidden < 1 or self.lstm_layers < 1:
            raise InvalidArgumentError("feature_dim, lstm_hidden and lstm_layers must be >= 1")

    @property
    def ffn_width(self) -> int:
        return self.ffn_dim if self.ffn_dim is not None else 4 * self.d_model

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass(frozen=True)
class WindowSample:
    """One supervised example: lag-day features, their opens, next-day label."""

    features: np.ndarray  # (lag, feature_dim), normalized
    prior_opens: np.ndarray  # (lag,), normalized opens of the same days
    label: float  # normalized open of day lag+1
    ticker: str
    label_date: str

    def __post_init__(self):
        object.__setattr__(self, "features", np.asarray(self.features, dtype=np.float64))
        object.__setattr__(self, "prior_opens", np.asarray(self.prior_opens, dtype=np.float64))
        if self.features.ndim != 2:
            raise ShapeMismatchError(f"features must be 2-d, got shape {self.features.shape}")
        if self.prior_opens.shape != (self.features.shape[0],):
            raise ShapeMismatchError(
                f"prior_opens shape {self.prior_opens.shape} vs features rows {self.features.shape[0]}"
            )
        if np.isnan(self.features).any() or np.isnan(self.prior_opens).any() or np.isnan(self.label):
            raise InvalidArgumentError(f"sample for {self.ticker}@{self.label_date} has NaN values")


def stack_samples(samples: list[WindowSample]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batch arrays (features, prior_opens, labels) from aligned samples."""
    if not samples:
        raise InvalidArgumentError("cannot stack an empty sample list")
    shape = samples[0].features.shape
    for s in samples:
        if s.features.shape != shape:
            raise ShapeMismatchError(f"mixed feature shapes {shape} and {s.features.shape}")
    feats = np.stack([s.features for s in samples])
    priors = np.stack([s.prior_opens for s in samples])
    labels = np.array([s.label for s in samples], dtype=np.float64)
    return feats, priors, labels
