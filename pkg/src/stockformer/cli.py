"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .checkpoint import load_checkpoint, restore_params, save_checkpoint
from .errors import (
    DataError,
    InsufficientHistoryError,
    InvalidArgumentError,
    NumericError,
    StockformerError,
)
from .experiment import (
    ExperimentConfig,
    PreparedData,
    eval_series_for,
    make_windows,
    prepare,
    sweep as run_sweep,
    train as run_train,
    write_report,
)
from .indicators import IndicatorConfig, NormStats, annotate, apply_norm, invert_norm
from .market_data import load_csv, synth_series, write_csv
from .metrics import REPORT_COLUMNS, evaluate
from .models import build_model
from .sentiment import LexiconScorer, attach, default_lexicon, load_scores


@click.group()
def cli():
    """Stock trend prediction: indicators, sentiment fusion, transformer vs BiLSTM."""


def _parse_int_list(_ctx, _param, value):
    if value is None:
        return None
    try:
        return tuple(int(v) for v in value.split(","))
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {value!r}") from None


def _parse_str_list(_ctx, _param, value):
    return tuple(v.strip() for v in value.split(",")) if value is not None else None


_CONFIG_OPTIONS = [
    click.option("--config", "config_path", type=click.Path(), help="JSON config file (ExperimentConfig fields)."),
    click.option("--lags", callback=_parse_int_list, help="Comma-separated lag windows, e.g. 4,9,14."),
    click.option("--epochs", type=int),
    click.option("--lr", type=float),
    click.option("--batch", type=int),
    click.option("--split", type=float),
    click.option("--models", callback=_parse_str_list, help="Comma-separated: stockformer,bilstm."),
    click.option("--data-csv", type=click.Path()),
    click.option("--synth-tickers", callback=_parse_str_list),
    click.option("--synth-days", type=int),
    click.option("--synth-regime", type=click.Choice(["trend", "mean_revert", "mix"])),
    click.option("--scores-csv", type=click.Path()),
    click.option("--lexicon-path", type=click.Path()),
    click.option("--sentiment-channels", type=click.Choice(["1", "3"])),
    click.option("--d-model", type=int),
    click.option("--heads", type=int),
    click.option("--enc-layers", type=int),
    click.option("--dec-layers", type=int),
    click.option("--dropout", type=float),
    click.option("--ffn-dim", type=int),
    click.option("--pe-n", type=float),
    click.option("--lstm-hidden", type=int),
    click.option("--lstm-layers", type=int),
    click.option("--lstm-bidirectional/--lstm-unidirectional", default=None),
    click.option("--use-layer-norm/--no-layer-norm", default=None),
    click.option("--per-day-embedder", is_flag=True, default=None),
    click.option("--per-ticker", is_flag=True, default=None),
    click.option("--trust-indicators", is_flag=True, default=None),
]


def config_options(fn):
    for option in reversed(_CONFIG_OPTIONS):
        fn = option(fn)
    return fn


def _build_config(config_path: str | None, seed: int, overrides: dict) -> ExperimentConfig:
    fields = {}
    if config_path:
        path = Path(config_path)
        if not path.exists():
            raise DataError(f"config file not found: {path}")
        try:
            fields = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"config file {path} is not valid JSON: {exc}") from None
    fields["seed"] = seed
    for key, value in overrides.items():
        if value is not None:
            fields[key] = value
    if "sentiment_channels" in fields:
        fields["sentiment_channels"] = int(fields["sentiment_channels"])
    try:
        return ExperimentConfig.from_dict(fields)
    except TypeError as exc:
        raise InvalidArgumentError(f"bad config field: {exc}") from None


@cli.command()
@click.option("--tickers", default="SYNA", callback=_parse_str_list, help="Comma-separated symbols.")
@click.option("--days", default=750, show_default=True, type=int)
@click.option("--seed", required=True, type=int)
@click.option("--regime", default="mix", type=click.Choice(["trend", "mean_revert", "mix"]), show_default=True)
@click.option("--start-date", default="2019-03-18", show_default=True)
@click.option("--out", required=True, type=click.Path())
def synth(tickers, days, seed, regime, start_date, out):
    """Generate a deterministic synthetic market CSV."""
    series = [synth_series(t, days=days, seed=seed, regime=regime, start_date=start_date) for t in tickers]
    write_csv(series, out)
    click.echo(f"wrote {sum(len(s) for s in series)} rows for {len(series)} tickers to {out}")


@cli.command()
@click.option("--in", "in_path", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.option("--rsi-window", default=50, show_default=True, type=int)
@click.option("--sma-window", default=50, show_default=True, type=int)
@click.option("--ema-window", default=50, show_default=True, type=int)
@click.option("--macd-fast", default=12, show_default=True, type=int)
@click.option("--macd-slow", default=26, show_default=True, type=int)
@click.option("--trust-precomputed", is_flag=True)
def indicators(in_path, out, rsi_window, sma_window, ema_window, macd_fast, macd_slow, trust_precomputed):
    """Annotate a market CSV with RSI/EMA/SMA/MACD columns."""
    cfg = IndicatorConfig(
        rsi_window=rsi_window, sma_window=sma_window, ema_window=ema_window,
        macd_fast=macd_fast, macd_slow=macd_slow, trust_precomputed=trust_precomputed,
    )
    series = [annotate(s, cfg) for s in load_csv(in_path)]
    write_csv(series, out)
    click.echo(f"annotated {len(series)} tickers -> {out}")


@cli.command()
@click.option("--in", "in_path", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.option("--scores-csv", type=click.Path(), help="Precomputed probability CSV (takes precedence).")
@click.option("--lexicon-path", type=click.Path(), help="Custom lexicon file for the fallback scorer.")
def sentiment(in_path, out, scores_csv, lexicon_path):
    """Attach a sentiment score to every row of a market CSV."""
    scores = load_scores(scores_csv) if scores_csv else None
    lexicon = LexiconScorer.from_file(lexicon_path) if lexicon_path else default_lexicon()
    series = [attach(s, scores, lexicon) for s in load_csv(in_path)]
    write_csv(series, out)
    click.echo(f"attached sentiment for {len(series)} tickers -> {out}")


def _save_bundle(out_dir: Path, record, cfg: ExperimentConfig, kind: str, lag: int, stats: NormStats):
    out_dir.mkdir(parents=True, exist_ok=True)
    model = record.trained_model
    sidecar = {"kind": kind, "lag": lag, "experiment": cfg.to_dict()}
    save_checkpoint(out_dir / "model.npz", model.params, sidecar, cfg.seed)
    stats.to_csv(out_dir / "norm_stats.csv")
    with (out_dir / "loss.csv").open("w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        for epoch, value in enumerate(record.losses):
            fh.write(f"{epoch},{value!r}\n")
    with (out_dir / "report.csv").open("w", encoding="utf-8") as fh:
        fh.write(",".join(REPORT_COLUMNS) + "\n")
        fh.write(",".join(record.report.csv_row()) + "\n")


@cli.command()
@click.option("--seed", required=True, type=int, help="Run seed (mandatory for reproducibility).")
@click.option("--model", "kind", default="stockformer", type=click.Choice(["stockformer", "bilstm"]), show_default=True)
@click.option("--lag", default=4, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path())
@config_options
def train(seed, kind, lag, out, config_path, **overrides):
    """Train one model at one lag; write checkpoint, stats, loss curve, report."""
    cfg = _build_config(config_path, seed, overrides)
    data = prepare(cfg)
    record = run_train(kind, cfg, lag, data)
    _save_bundle(Path(out), record, cfg, kind, lag, data.stats)
    rep = record.report
    click.echo(
        f"{kind} lag={lag}: mse={rep.mse:.6f} r2={rep.r2:.4f} auc={rep.auc:.4f} dir_acc={rep.dir_acc:.4f}"
    )
    click.echo(f"bundle written to {out}")


@cli.command()
@click.option("--seed", required=True, type=int, help="Run seed (mandatory for reproducibility).")
@click.option("--out", required=True, type=click.Path())
@click.option("--workers", default=1, show_default=True, type=int, help="Parallel (model, lag) runs.")
@click.option("--save-checkpoints", is_flag=True, help="Also write a checkpoint bundle per run.")
@config_options
def sweep(seed, out, workers, save_checkpoints, config_path, **overrides):
    """Train every configured (model, lag) pair and write the report files."""
    cfg = _build_config(config_path, seed, overrides)
    data = prepare(cfg)
    records = run_sweep(cfg, data, workers=workers)
    paths = write_report(records, out)
    if save_checkpoints:
        for record in records:
            _save_bundle(Path(out) / f"{record.model}_{record.lag}", record, cfg,
                         record.model.split("[")[0], record.lag, data.stats)
    click.echo(f"{len(records)} runs -> {paths['results']}")


def _load_bundle(checkpoint: str):
    arrays, sidecar = load_checkpoint(checkpoint)
    meta = sidecar["config"]
    cfg = ExperimentConfig.from_dict(meta["experiment"])
    kind, lag = meta["kind"], meta["lag"]
    model = build_model(kind, cfg.model_config(lag))
    restore_params(model.params, arrays)
    stats_path = Path(checkpoint).parent / "norm_stats.csv"
    stats = NormStats.from_csv(stats_path)
    return model, cfg, kind, lag, stats


def _prepared_from_stats(cfg: ExperimentConfig, data_csv: str, stats: NormStats) -> PreparedData:
    series_list = load_csv(data_csv)
    indicator_cfg = IndicatorConfig(trust_precomputed=cfg.trust_indicators)
    scores = load_scores(cfg.scores_csv) if cfg.scores_csv else None
    lexicon = LexiconScorer.from_file(cfg.lexicon_path) if cfg.lexicon_path else default_lexicon()
    frames = {}
    for s in series_list:
        cooked = attach(annotate(s, indicator_cfg), scores, lexicon)
        frames[s.ticker] = apply_norm(cooked, stats, cfg.feature_names)
    return PreparedData(frames=frames, stats=stats, features=cfg.feature_names)


@cli.command("evaluate")
@click.option("--checkpoint", required=True, type=click.Path())
@click.option("--data-csv", required=True, type=click.Path())
@click.option("--scores-csv", type=click.Path())
def evaluate_cmd(checkpoint, data_csv, scores_csv):
    """Evaluate a checkpoint on a market CSV; prints one report row."""
    model, cfg, kind, lag, stats = _load_bundle(checkpoint)
    if scores_csv:
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "scores_csv": scores_csv})
    data = _prepared_from_stats(cfg, data_csv, stats)
    samples = []
    for name in sorted(data.frames):
        samples.extend(make_windows(data.frames[name], lag, data.features))
    if not samples:
        raise InsufficientHistoryError(f"no usable windows at lag {lag} in {data_csv}")
    from .experiment import _batched_eval

    preds = _batched_eval(model, samples)
    report = evaluate(eval_series_for(samples, preds), model=kind, lag=lag, seed=cfg.seed)
    click.echo(",".join(REPORT_COLUMNS))
    click.echo(",".join(report.csv_row()))


@cli.command()
@click.option("--checkpoint", required=True, type=click.Path())
@click.option("--data-csv", required=True, type=click.Path())
@click.option("--scores-csv", type=click.Path())
def predict(checkpoint, data_csv, scores_csv):
    """Predict each ticker's next opening price from its latest lag window."""
    model, cfg, kind, lag, stats = _load_bundle(checkpoint)
    if scores_csv:
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "scores_csv": scores_csv})
    data = _prepared_from_stats(cfg, data_csv, stats)
    for name in sorted(data.frames):
        frame = data.frames[name]
        start = frame.first_complete_index(data.features)
        if len(frame) - start < lag:
            raise InsufficientHistoryError(
                f"{name}: {len(frame) - start} usable days, lag {lag} needs more"
            )
        feats = frame.matrix(data.features)[-lag:][None]
        priors = frame.columns["open"][-lag:][None]
        z = float(model.forward_batch(feats, priors, mode="eval").data[0])
        price = invert_norm(z, name, "open", stats)
        click.echo(f"{name}: next open ~ {price:.4f} (z={z:.4f}, after {frame.dates[-1]})")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except InvalidArgumentError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    except NumericError as exc:
        click.echo(f"numeric failure: {exc}", err=True)
        return 3
    except StockformerError as exc:  # anything else from the package
        click.echo(f"error: {exc}", err=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
