"""Stock trend prediction at desk scale: technical indicators, headline
sentiment fusion, an encoder-decoder transformer and a BiLSTM baseline on a
small reverse-mode autodiff engine, plus a lag-sweep experiment harness."""

from . import errors
from .experiment import (
    ExperimentConfig,
    RunRecord,
    chrono_split,
    make_windows,
    prepare,
    sweep,
    train,
    write_report,
)
from .indicators import IndicatorConfig, NormStats, annotate, apply_norm, fit_norm, invert_norm
from .market_data import MarketEntry, MarketSeries, load_csv, synth_series, write_csv
from .metrics import EvalReport, EvalSeries, directional_accuracy, mse, r2, regression_auc
from .models import BiLstm, ModelConfig, StockFormer, WindowSample, build_model
from .rng import Rng
from .sentiment import LexiconScorer, SentimentRecord, attach, lexicon_score, load_scores
from .tensor import Tensor, backward, no_grad

__version__ = "0.1.0"

__all__ = [
    "BiLstm",
    "EvalReport",
    "EvalSeries",
    "ExperimentConfig",
    "IndicatorConfig",
    "LexiconScorer",
    "MarketEntry",
    "MarketSeries",
    "ModelConfig",
    "NormStats",
    "Rng",
    "RunRecord",
    "SentimentRecord",
    "StockFormer",
    "Tensor",
    "WindowSample",
    "annotate",
    "apply_norm",
    "attach",
    "backward",
    "build_model",
    "chrono_split",
    "directional_accuracy",
    "errors",
    "fit_norm",
    "invert_norm",
    "lexicon_score",
    "load_csv",
    "load_scores",
    "make_windows",
    "mse",
    "no_grad",
    "prepare",
    "r2",
    "regression_auc",
    "sweep",
    "synth_series",
    "train",
    "write_csv",
    "write_report",
]
