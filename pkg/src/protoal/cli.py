"""Operator command line: synthetic data, training, experiments, score dumps,
and the annotation service.

Exit codes: 0 success, 2 usage/unknown flag (click), 3 data parse or schema
problems, 4 engine errors (budgets, labels, dimensions), 5 numeric blow-up,
6 missing files. Scalar output is printed with 6 significant digits; CSV
artifacts keep full precision.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import engine as engine_mod
from .acquisition import (
    Strategy,
    coreset_initial_distances,
    random_scores,
    score_probs_matrix,
)
from .classifier import (
    HyperParams,
    embed_batch,
    fit,
    init_params,
    load_checkpoint,
    save_checkpoint,
    score_probs_batch,
)
from .data import (
    SYNTH_PRESETS,
    SynthConfig,
    gen_blobs,
    load_csv,
    load_jsonl,
    save_jsonl,
    split,
)
from .engine import (
    ALConfig,
    PRESET_SCHEDULES,
    evaluate,
    preset_config,
    run_experiment,
    write_aggregate_csv,
    write_scores_csv,
    write_seed_csv,
)
from .errors import (
    BudgetExceedsPool,
    DegenerateVector,
    DimensionMismatch,
    DuplicateId,
    InvalidLabel,
    NonFiniteLoss,
    OracleUnavailable,
    ParseError,
    ProtoALError,
    SchemaError,
    TooFewClasses,
)

EXIT_DATA = 3
EXIT_ENGINE = 4
EXIT_NUMERIC = 5
EXIT_MISSING = 6

_EXIT_CODES = (
    (NonFiniteLoss, EXIT_NUMERIC),
    ((ParseError, SchemaError, DuplicateId), EXIT_DATA),
    (
        (
            BudgetExceedsPool,
            DegenerateVector,
            DimensionMismatch,
            InvalidLabel,
            OracleUnavailable,
            TooFewClasses,
        ),
        EXIT_ENGINE,
    ),
    (FileNotFoundError, EXIT_MISSING),
)


def _fail(exc: Exception) -> None:
    click.echo(f"error: {exc}", err=True)
    for types, code in _EXIT_CODES:
        if isinstance(exc, types):
            sys.exit(code)
    sys.exit(EXIT_ENGINE if isinstance(exc, ProtoALError) else 1)


def _load_dataset(path: str):
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"dataset {path} does not exist")
    return load_csv(p) if p.suffix == ".csv" else load_jsonl(p)


def _read_json(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config {path} does not exist")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}: {exc.msg}") from exc


def _al_config(spec: str, strategy: str | None, seeds: str | None, d_in: int) -> ALConfig:
    """Build an ALConfig from a preset name or a JSON file, with overrides."""
    if spec in PRESET_SCHEDULES:
        hp = HyperParams(d_in=d_in, d_emb=max(2, min(d_in, 16)))
        config = preset_config(spec, hp=hp)
    else:
        config = ALConfig.from_dict(_read_json(spec))
    if strategy is not None:
        config.strategy = strategy
    if seeds is not None:
        config.seeds = [int(s) for s in seeds.split(",") if s.strip()]
    return config


@click.group()
def main():
    """Margin-penalized prototype classifier and active-learning harness."""


@main.command("gen-synth")
@click.option("--config", "config_path", required=True, type=str,
              help="SynthConfig JSON file or preset name "
                   f"({', '.join(sorted(SYNTH_PRESETS))})")
@click.option("--out", "out_path", required=True, type=str, help="output JSONL path")
def gen_synth(config_path, out_path):
    """Generate a Gaussian-blob dataset."""
    try:
        if config_path in SYNTH_PRESETS:
            cfg = SYNTH_PRESETS[config_path]
        else:
            cfg = SynthConfig.from_dict(_read_json(config_path))
        ds = gen_blobs(cfg)
        save_jsonl(ds, out_path)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes
        _fail(exc)
    click.echo(f"wrote {len(ds)} samples ({cfg.num_classes} classes, d_in={cfg.d_in}) to {out_path}")


@main.command()
@click.option("--data", "data_path", required=True, type=str)
@click.option("--hp", "hp_path", required=True, type=str, help="HyperParams JSON file")
@click.option("--out", "ckpt_path", required=True, type=str, help="checkpoint output path")
@click.option("--test-fraction", default=0.2, show_default=True)
@click.option("--split-seed", default=0, show_default=True)
@click.option("--seed", default=0, show_default=True, help="model init / shuffle seed")
def train(data_path, hp_path, ckpt_path, test_fraction, split_seed, seed):
    """Fit once on a train split and report test accuracy."""
    try:
        ds = _load_dataset(data_path)
        hp = HyperParams.from_dict(_read_json(hp_path))
        if hp.d_in != ds.d_in:
            raise SchemaError(f"hp.d_in {hp.d_in} does not match dataset d_in {ds.d_in}")
        train_ds, test_ds = split(ds, test_fraction, split_seed)
        labeled = [s.id for s in train_ds.samples if s.label is not None]
        if not labeled:
            raise SchemaError("training split has no labeled samples")
        params = init_params(hp, ds.num_classes, rng_seed=seed)
        params, stats = fit(
            params,
            train_ds.feature_matrix(labeled),
            train_ds.labels(labeled),
            hp,
            rng_seed=seed,
        )
        accuracy = evaluate(params, test_ds)
        save_checkpoint(ckpt_path, params, hp, seed)
    except Exception as exc:  # noqa: BLE001
        _fail(exc)
    final_loss = stats.epoch_losses[-1] if stats.epoch_losses else float("nan")
    click.echo(f"trained on {len(labeled)} samples, final loss {final_loss:.6g}")
    click.echo(f"test accuracy {accuracy:.6g}")
    click.echo(f"checkpoint written to {ckpt_path}")


@main.command()
@click.option("--data", "data_path", required=True, type=str)
@click.option("--al", "al_spec", required=True, type=str,
              help="ALConfig JSON file or preset name "
                   f"({', '.join(sorted(PRESET_SCHEDULES))})")
@click.option("--strategy", default=None, type=click.Choice([s.value for s in Strategy]))
@click.option("--seeds", default=None, type=str, help="comma-separated master seeds")
@click.option("--out", "out_dir", required=True, type=str)
@click.option("--test-fraction", default=0.2, show_default=True)
@click.option("--split-seed", default=0, show_default=True)
@click.option("--plot/--no-plot", default=True, show_default=True,
              help="also render learning_curve.png next to the CSVs")
@click.option("--dump-scores", is_flag=True, default=False,
              help="write per-round score dumps (first seed only)")
def experiment(data_path, al_spec, strategy, seeds, out_dir, test_fraction,
               split_seed, plot, dump_scores):
    """Run a multi-seed experiment; writes curves.csv and aggregate.csv."""
    try:
        ds = _load_dataset(data_path)
        config = _al_config(al_spec, strategy, seeds, ds.d_in)
        if config.hp.d_in != ds.d_in:
            raise SchemaError(
                f"hp.d_in {config.hp.d_in} does not match dataset d_in {ds.d_in}"
            )
        train_ds, test_ds = split(ds, test_fraction, split_seed)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)

        dumps = {}
        on_scores = None
        if dump_scores:
            def on_scores(round_index, scores):
                dumps.setdefault(round_index, scores)

        curve = run_experiment(config, train_ds, test_ds, on_scores=on_scores)
        write_seed_csv(curve, out / "curves.csv")
        write_aggregate_csv(curve, out / "aggregate.csv")
        (out / "config.json").write_text(
            json.dumps(config.to_dict(), indent=2) + "\n", encoding="utf-8"
        )
        for round_index, scores in dumps.items():
            write_scores_csv(scores, out / f"scores_round{round_index:03d}.csv")
        if plot:
            from .report import plot_learning_curves

            plot_learning_curves(
                {config.strategy: curve},
                out / "learning_curve.png",
                title=f"{config.strategy} on {Path(data_path).name}",
            )
    except Exception as exc:  # noqa: BLE001
        _fail(exc)
    rows = curve.aggregate()
    final_round, final_labeled, final_mean, final_std = rows[-1]
    click.echo(
        f"{config.strategy}: {len(config.seeds)} seed(s), {config.rounds} rounds; "
        f"final accuracy {final_mean:.6g} +- {final_std:.6g} at {final_labeled} labels"
    )
    click.echo(f"artifacts in {out}")


@main.command()
@click.option("--ckpt", "ckpt_path", required=True, type=str)
@click.option("--data", "data_path", required=True, type=str)
@click.option("--strategy", required=True, type=click.Choice([s.value for s in Strategy]))
@click.option("--out", "out_csv", required=True, type=str)
@click.option("--seed", default=0, show_default=True, help="seed for the random strategy")
def score(ckpt_path, data_path, strategy, out_csv, seed):
    """Dump per-sample confidence scores for auditing selections.

    Labeled samples in the file act as the labeled set; scores are emitted
    for the unlabeled remainder (or every sample when none are labeled).
    """
    try:
        if not Path(ckpt_path).exists():
            raise FileNotFoundError(f"checkpoint {ckpt_path} does not exist")
        params, hp, _ = load_checkpoint(ckpt_path)
        ds = _load_dataset(data_path)
        if ds.d_in != hp.d_in:
            raise SchemaError(f"dataset d_in {ds.d_in} does not match checkpoint {hp.d_in}")
        labeled_ids = [s.id for s in ds.samples if s.label is not None]
        pool_ids = [s.id for s in ds.samples if s.label is None] or ds.ids
        strat = Strategy(strategy)
        if strat is Strategy.RANDOM:
            scores = random_scores(pool_ids, seed)
        elif strat is Strategy.CORESET:
            if not labeled_ids:
                raise SchemaError("coreset scores need at least one labeled sample")
            labeled_emb = embed_batch(params, ds.feature_matrix(labeled_ids))
            pool_emb = embed_batch(params, ds.feature_matrix(pool_ids))
            scores = coreset_initial_distances(labeled_emb, pool_emb, pool_ids)
        else:
            F = embed_batch(params, ds.feature_matrix(pool_ids))
            probs = score_probs_batch(params, F, hp)
            scores = score_probs_matrix(probs, pool_ids, strat)
        write_scores_csv(scores, out_csv)
    except Exception as exc:  # noqa: BLE001
        _fail(exc)
    click.echo(f"wrote {len(scores)} scores to {out_csv}")


@main.command()
@click.option("--data", "data_path", required=True, type=str)
@click.option("--al", "al_spec", required=True, type=str,
              help="default session ALConfig (JSON file or preset name)")
@click.option("--listen", default="127.0.0.1:8000", show_default=True)
@click.option("--state-dir", "state_dir", required=True, type=str)
@click.option("--test-fraction", default=0.2, show_default=True)
@click.option("--split-seed", default=0, show_default=True)
def serve(data_path, al_spec, listen, state_dir, test_fraction, split_seed):
    """Start the human-annotation HTTP service."""
    try:
        import uvicorn

        from .service import create_app

        ds = _load_dataset(data_path)
        config = _al_config(al_spec, None, None, ds.d_in)
        app = create_app(
            state_dir,
            defaults={
                "dataset": str(data_path),
                "config": config.to_dict(),
                "test_fraction": test_fraction,
                "split_seed": split_seed,
            },
        )
        host, _, port = listen.rpartition(":")
        uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    except Exception as exc:  # noqa: BLE001
        _fail(exc)


if __name__ == "__main__":
    main()
