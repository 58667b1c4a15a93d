"""Windowing, chronological splitting, training, and the lag sweep."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    InsufficientHistoryError,
    InvalidArgumentError,
    IoError,
    NumericError,
)
from .indicators import (
    DEFAULT_NORM_FEATURES,
    FeatureFrame,
    IndicatorConfig,
    NormStats,
    annotate,
    apply_norm,
    fit_norm,
)
from .market_data import MarketSeries, load_csv, synth_series
from .metrics import REPORT_COLUMNS, EvalReport, EvalSeries, directional_accuracy, evaluate
from .models import MODEL_KINDS, ModelConfig, WindowSample, build_model, stack_samples
from .optim import Adam
from .rng import Rng, derive_seed
from .sentiment import LexiconScorer, attach, default_lexicon, load_scores
from .tensor import Tensor, backward, mse_loss, no_grad

FEATURES_SCALAR = ("open", "high", "low", "close", "rsi", "ema", "sma", "macd", "sentiment")
FEATURES_3CH = ("open", "high", "low", "close", "rsi", "ema", "sma", "macd", "p_pos", "p_neu", "p_neg")

_TAG_SHUFFLE = 3
_TAG_DROPOUT = 4
_MODEL_TAGS = {"stockformer": 101, "bilstm": 102}
_EVAL_CHUNK = 512


def _tune_runtime() -> None:
    """Keep training memory-friendly: recycle freed heap blocks instead of
    handing them back to the kernel (glibc re-faults them otherwise), and pin
    BLAS to one thread (threaded BLAS thrashes on this workload's small
    matrices). Both calls are safe no-ops where unsupported."""
    try:
        import ctypes

        libc = ctypes.CDLL("libc.so.6")
        libc.mallopt(-4, 0)  # M_MMAP_MAX: serve large blocks from the heap
        libc.mallopt(-1, 1 << 30)  # M_TRIM_THRESHOLD: keep freed blocks cached
    except OSError:
        pass
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(limits=1)
    except ImportError:
        pass


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    lags: tuple[int, ...] = (4, 9, 14, 24, 29)
    epochs: int = 50
    lr: float = 1e-4
    batch: int = 32
    split: float = 0.8
    models: tuple[str, ...] = ("stockformer", "bilstm")
    # data source: a CSV path, or a synthetic spec
    data_csv: str | None = None
    synth_tickers: tuple[str, ...] = ("FB", "AMZN", "AAPL", "NFLX", "GOOG")
    synth_days: int = 750
    synth_regime: str = "mix"
    # sentiment source
    scores_csv: str | None = None
    lexicon_path: str | None = None
    sentiment_channels: int = 1
    # model hyperparameters (mirrors ModelConfig)
    d_model: int = 80
    heads: int = 8
    enc_layers: int = 6
    dec_layers: int = 6
    dropout: float = 0.1
    ffn_dim: int | None = None
    pe_n: float = 10_000.0
    lstm_hidden: int = 10
    lstm_layers: int = 2
    lstm_bidirectional: bool = True
    use_layer_norm: bool = True
    per_day_embedder: bool = False
    per_ticker: bool = False
    trust_indicators: bool = False

    def __post_init__(self):
        if not 0.0 < self.split < 1.0:
            raise InvalidArgumentError(f"split must be in (0, 1), got {self.split}")
        if any(lag < 1 for lag in self.lags) or not self.lags:
            raise InvalidArgumentError(f"lags must all be >= 1, got {self.lags}")
        if self.epochs < 0 or self.batch < 1:
            raise InvalidArgumentError("epochs must be >= 0 and batch >= 1")
        unknown = [m for m in self.models if m not in MODEL_KINDS]
        if unknown or not self.models:
            raise InvalidArgumentError(f"models must be drawn from {MODEL_KINDS}, got {self.models}")
        if self.sentiment_channels not in (1, 3):
            raise InvalidArgumentError(f"sentiment_channels must be 1 or 3, got {self.sentiment_channels}")

    @property
    def feature_names(self) -> tuple[str, ...]:
        return FEATURES_SCALAR if self.sentiment_channels == 1 else FEATURES_3CH

    def model_config(self, lag: int) -> ModelConfig:
        return ModelConfig(
            lag=lag,
            feature_dim=len(self.feature_names),
            d_model=self.d_model,
            heads=self.heads,
            enc_layers=self.enc_layers,
            dec_layers=self.dec_layers,
            dropout=self.dropout,
            ffn_dim=self.ffn_dim,
            pe_n=self.pe_n,
            lstm_hidden=self.lstm_hidden,
            lstm_layers=self.lstm_layers,
            lstm_bidirectional=self.lstm_bidirectional,
            seed=self.seed,
            use_layer_norm=self.use_layer_norm,
            per_day_embedder=self.per_day_embedder,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("lags", "models", "synth_tickers"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        for key in ("lags", "models", "synth_tickers"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass
class RunRecord:
    model: str
    lag: int
    config: dict
    losses: list[float]
    report: EvalReport
    trained_model: object = field(default=None, repr=False, compare=False)


@dataclass
class PreparedData:
    """Annotated, sentiment-attached, normalized dataset shared by all runs."""

    frames: dict[str, FeatureFrame]
    stats: NormStats
    features: tuple[str, ...]


def load_dataset(cfg: ExperimentConfig) -> list[MarketSeries]:
    """Raw series from the configured source (CSV file or synthetic spec)."""
    if cfg.data_csv:
        return load_csv(cfg.data_csv)
    return [
        synth_series(t, days=cfg.synth_days, seed=cfg.seed, regime=cfg.synth_regime)
        for t in cfg.synth_tickers
    ]


def prepare(cfg: ExperimentConfig, series_list: list[MarketSeries] | None = None) -> PreparedData:
    """Annotate indicators, attach sentiment, fit and apply normalization."""
    series_list = series_list if series_list is not None else load_dataset(cfg)
    indicator_cfg = IndicatorConfig(trust_precomputed=cfg.trust_indicators)
    scores = load_scores(cfg.scores_csv) if cfg.scores_csv else None
    lexicon = LexiconScorer.from_file(cfg.lexicon_path) if cfg.lexicon_path else default_lexicon()

    frames = {}
    annotated = [attach(annotate(s, indicator_cfg), scores, lexicon) for s in series_list]
    stats = fit_norm(annotated, DEFAULT_NORM_FEATURES, cfg.split)
    for s in annotated:
        frames[s.ticker] = apply_norm(s, stats, cfg.feature_names)
    return PreparedData(frames=frames, stats=stats, features=cfg.feature_names)


def make_windows(frame: FeatureFrame, lag: int, features: tuple[str, ...]) -> list[WindowSample]:
    """One sample per position whose lag window sits past the warm-up
    boundary; the label is the following day's normalized open."""
    if lag < 1:
        raise InvalidArgumentError(f"lag must be >= 1, got {lag}")
    start = frame.first_complete_index(features)
    matrix = frame.matrix(features)
    opens = frame.columns["open"]
    samples = []
    for label_pos in range(start + lag, len(frame)):
        window = slice(label_pos - lag, label_pos)
        samples.append(
            WindowSample(
                features=matrix[window],
                prior_opens=opens[window],
                label=float(opens[label_pos]),
                ticker=frame.ticker,
                label_date=frame.dates[label_pos],
            )
        )
    return samples


def chrono_split(samples: list[WindowSample], split: float) -> tuple[list[WindowSample], list[WindowSample]]:
    """Per ticker: first floor(split * count) samples train, the rest test."""
    if not 0.0 < split < 1.0:
        raise InvalidArgumentError(f"split must be in (0, 1), got {split}")
    by_ticker: dict[str, list[WindowSample]] = {}
    for s in samples:
        by_ticker.setdefault(s.ticker, []).append(s)
    train, test = [], []
    for ticker, group in by_ticker.items():
        dates = [s.label_date for s in group]
        if dates != sorted(dates):
            raise InvalidArgumentError(f"samples for {ticker!r} are not chronological")
        cut = int(split * len(group))
        train.extend(group[:cut])
        test.extend(group[cut:])
    return train, test


def naive_direction_baseline(test: EvalSeries) -> float:
    """Directional accuracy of predicting no change from the prior open."""
    return directional_accuracy(test.truth, test.prior, test.prior)


def _batched_eval(model, samples: list[WindowSample]) -> np.ndarray:
    preds = []
    with no_grad():
        for i in range(0, len(samples), _EVAL_CHUNK):
            feats, priors, _ = stack_samples(samples[i : i + _EVAL_CHUNK])
            preds.append(model.forward_batch(feats, priors, mode="eval").data)
    return np.concatenate(preds)


def eval_series_for(samples: list[WindowSample], preds: np.ndarray) -> EvalSeries:
    truth = np.array([s.label for s in samples])
    prior = np.array([s.prior_opens[-1] for s in samples])
    return EvalSeries(truth=truth, pred=preds, prior=prior)


def train(
    kind: str,
    cfg: ExperimentConfig,
    lag: int,
    data: PreparedData | None = None,
    ticker: str | None = None,
) -> RunRecord:
    """Train one model at one lag and evaluate it on the held-out tail.

    Deterministic for a fixed (seed, data, config): parameter init, epoch
    shuffles and dropout masks all derive from the config seed.
    """
    _tune_runtime()
    data = data if data is not None else prepare(cfg)
    frames = data.frames if ticker is None else {ticker: data.frames[ticker]}
    samples: list[WindowSample] = []
    for name in sorted(frames):
        samples.extend(make_windows(frames[name], lag, data.features))
    train_set, test_set = chrono_split(samples, cfg.split)
    if not train_set:
        raise InsufficientHistoryError(f"no training samples at lag {lag}")
    if not test_set:
        raise InsufficientHistoryError(f"no test samples at lag {lag}")

    model = build_model(kind, cfg.model_config(lag))
    run_tag = derive_seed(derive_seed(cfg.seed, _MODEL_TAGS[kind]), lag)
    shuffle_rng = Rng(derive_seed(run_tag, _TAG_SHUFFLE))
    dropout_rng = Rng(derive_seed(run_tag, _TAG_DROPOUT))
    optimizer = Adam(list(model.params.values()), lr=cfg.lr)

    feats, priors, labels = stack_samples(train_set)
    n = len(train_set)
    losses = []
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for i in range(0, n, cfg.batch):
            idx = order[i : i + cfg.batch]
            out = model.forward_batch(feats[idx], priors[idx], mode="train", rng=dropout_rng)
            loss = mse_loss(out, Tensor(labels[idx]))
            value = loss.item()
            if not math.isfinite(value):
                raise NumericError(f"{kind} lag {lag}: non-finite loss at epoch {epoch}")
            backward(loss)
            optimizer.step()
            total += value * len(idx)
        losses.append(total / n)

    preds = _batched_eval(model, test_set)
    series = eval_series_for(test_set, preds)
    label = kind if ticker is None else f"{kind}[{ticker}]"
    report = evaluate(series, model=label, lag=lag, seed=cfg.seed)
    return RunRecord(
        model=label, lag=lag, config=cfg.to_dict(), losses=losses, report=report,
        trained_model=model,
    )


_WORKER_DATA: PreparedData | None = None


def _sweep_worker(task: tuple) -> RunRecord:
    kind, cfg_dict, lag, ticker = task
    return train(kind, ExperimentConfig.from_dict(cfg_dict), lag, _WORKER_DATA, ticker=ticker)


def sweep(cfg: ExperimentConfig, data: PreparedData | None = None, workers: int = 1) -> list[RunRecord]:
    """All (model, lag) runs over a shared prepared dataset.

    Runs are independent (separately seeded, no shared mutable state), so
    ``workers > 1`` fans them out across processes; record order and all
    numeric results are identical to the serial schedule.
    """
    _tune_runtime()
    data = data if data is not None else prepare(cfg)
    tickers = sorted(data.frames) if cfg.per_ticker else [None]
    tasks = [
        (kind, cfg.to_dict(), lag, ticker)
        for kind in cfg.models
        for lag in cfg.lags
        for ticker in tickers
    ]
    if workers > 1 and len(tasks) > 1:
        import multiprocessing
        from concurrent.futures import ProcessPoolExecutor

        global _WORKER_DATA
        _WORKER_DATA = data  # inherited by forked workers, no pickling
        try:
            ctx = multiprocessing.get_context("fork")
            with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
                return list(pool.map(_sweep_worker, tasks))
        finally:
            _WORKER_DATA = None
    return [train(kind, cfg, lag, data, ticker=t) for (kind, _, lag, t) in tasks]


# --- reporting ----------------------------------------------------------------


def write_report(records: list[RunRecord], out_dir) -> dict[str, Path]:
    """results.csv, per-run loss curves, a text summary, and plot data."""
    if not records:
        raise InvalidArgumentError("no run records to report")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create report directory {out}: {exc}") from None

    paths: dict[str, Path] = {}
    results = out / "results.csv"
    with results.open("w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(REPORT_COLUMNS) + "\n")
        for rec in records:
            fh.write(",".join(rec.report.csv_row()) + "\n")
    paths["results"] = results

    for rec in records:
        loss_path = out / f"loss_{rec.model}_{rec.lag}.csv"
        with loss_path.open("w", encoding="utf-8", newline="") as fh:
            fh.write("epoch,loss\n")
            for epoch, value in enumerate(rec.losses):
                fh.write(f"{epoch},{value!r}\n")
        paths[f"loss_{rec.model}_{rec.lag}"] = loss_path

    models = sorted({rec.model for rec in records})
    lags = sorted({rec.lag for rec in records})
    by_key = {(rec.model, rec.lag): rec.report for rec in records}

    summary = out / "summary.txt"
    with summary.open("w", encoding="utf-8") as fh:
        fh.write(f"{'lag':>5}  {'model':<24} {'mse':>12} {'r2':>9} {'auc':>7} {'dir_acc':>8}\n")
        for lag in lags:
            for model in models:
                rep = by_key.get((model, lag))
                if rep is None:
                    continue
                fh.write(
                    f"{lag:>5}  {model:<24} {rep.mse:>12.6f} {rep.r2:>9.4f}"
                    f" {rep.auc:>7.4f} {rep.dir_acc:>8.4f}\n"
                )
    paths["summary"] = summary

    plot = out / "dir_acc_vs_lag.csv"
    with plot.open("w", encoding="utf-8", newline="") as fh:
        fh.write("lag," + ",".join(models) + "\n")
        for lag in lags:
            cells = [str(lag)]
            for model in models:
                rep = by_key.get((model, lag))
                cells.append(repr(rep.dir_acc) if rep else "")
            fh.write(",".join(cells) + "\n")
    paths["plot"] = plot
    return paths
