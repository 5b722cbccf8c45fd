"""Command-line surface: synth, check, train, eval, attribute, traj, experiment.

Global flags (--config, --seed, --out) set defaults that every subcommand
picks up; subcommand flags override them. Every command exits nonzero on any
validation failure.
"""

from __future__ import annotations

import glob
import json
import os
import sys

import click
import numpy as np

from . import attribution as attribution_mod
from . import evaluation as evaluation_mod
from .experiment import ExperimentConfig, run_experiment
from .feature_store import (
    DatasetError,
    SplitSpec,
    SynthBlock,
    SynthSpec,
    load_dataset,
    save_dataset,
    split_random,
    synth_generate,
)
from .fusion import load_checkpoint
from .trainer import TrainConfig, train_and_checkpoint
from .trajectory import (
    export_feature_block,
    load_trajectories,
    train_trajectory,
)


def _load_json(path):
    with open(path) as f:
        return json.load(f)


def _fail(msg: str):
    click.echo(f"error: {msg}", err=True)
    sys.exit(1)


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON config file (fields depend on the subcommand).")
@click.option("--seed", type=int, default=None, help="Default seed.")
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="Default output directory.")
@click.pass_context
def main(ctx, config_path, seed, out_dir):
    ctx.obj = {
        "config": _load_json(config_path) if config_path else {},
        "seed": seed,
        "out": out_dir,
    }


def _resolved(ctx, seed, out_dir, required_out=True):
    seed = seed if seed is not None else ctx.obj.get("seed")
    out_dir = out_dir or ctx.obj.get("out")
    if required_out and not out_dir:
        _fail("an output directory is required (--out)")
    return (seed if seed is not None else 0), out_dir


@main.command()
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.option("--split-fraction", type=float, default=None,
              help="Also reassign train/query/gallery splits after generation.")
@click.pass_context
def synth(ctx, seed, out_dir, split_fraction):
    """Generate a synthetic dataset from the --config synth spec."""
    seed, out_dir = _resolved(ctx, seed, out_dir)
    cfg = ctx.obj["config"]
    try:
        spec = SynthSpec(
            identities=cfg.get("identities", 10),
            cameras=cfg.get("cameras", 2),
            samples_per_identity=cfg.get("samples_per_identity", 8),
            blocks=[SynthBlock(b["name"], int(b["dim"]), b.get("mode", "informative"))
                    for b in cfg.get("blocks", [{"name": "reid", "dim": 8}])],
            noise=cfg.get("noise", 0.1),
        )
        ds = synth_generate(spec, seed)
        if split_fraction is not None:
            ds = split_random(ds, SplitSpec(train_fraction=split_fraction, seed=seed))
        save_dataset(ds, out_dir)
    except (DatasetError, ValueError) as e:
        _fail(str(e))
    click.echo(f"wrote {len(ds.records)} samples, "
               f"{ds.num_identities} identities to {out_dir}")


@main.command()
@click.argument("dataset_dir", type=click.Path(exists=True))
@click.option("--merge-fragments", is_flag=True,
              help="Merge <block>.fragment.json files into the manifest first.")
def check(dataset_dir, merge_fragments):
    """Validate a dataset directory; exit nonzero on any finding."""
    if merge_fragments:
        try:
            _merge_fragments(dataset_dir)
        except (DatasetError, ValueError, OSError) as e:
            _fail(str(e))
    try:
        ds = load_dataset(dataset_dir)
    except DatasetError as e:
        _fail(str(e))
    click.echo(f"ok: {len(ds.records)} samples, {len(ds.schema)} blocks, "
               f"{ds.num_identities} identities")


def _merge_fragments(dataset_dir: str) -> None:
    manifest_path = os.path.join(dataset_dir, "manifest.json")
    manifest = _load_json(manifest_path)
    sample_ids = [str(s["id"]) for s in manifest["samples"]]
    known = {b["name"] for b in manifest["blocks"]}
    for frag_path in sorted(glob.glob(os.path.join(dataset_dir, "*.fragment.json"))):
        frag = _load_json(frag_path)
        name, dim = frag["name"], int(frag["dim"])
        if frag.get("rows") != len(sample_ids):
            raise DatasetError(
                f"{frag_path}: {frag.get('rows')} rows, manifest has "
                f"{len(sample_ids)} samples"
            )
        if "sample_ids" in frag and list(frag["sample_ids"]) != sample_ids:
            raise DatasetError(f"{frag_path}: sample id order differs from manifest")
        if name not in known:
            manifest["blocks"].append({"name": name, "dim": dim})
            known.add(name)
    with open(manifest_path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)


@main.command()
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True), required=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.pass_context
def train(ctx, dataset_dir, seed, out_dir):
    """Train the fusion model; writes model.json/model.f32, history.csv and
    a train_config.json echo of the effective configuration."""
    seed, out_dir = _resolved(ctx, seed, out_dir)
    cfg = dict(ctx.obj["config"])
    cfg.setdefault("seed", seed)
    try:
        tcfg = TrainConfig(**cfg)
        ds = load_dataset(dataset_dir)
        _, history = train_and_checkpoint(ds, tcfg, out_dir)
    except (DatasetError, ValueError, TypeError, FloatingPointError) as e:
        _fail(str(e))
    with open(os.path.join(out_dir, "train_config.json"), "w") as f:
        json.dump(tcfg.echo(), f, indent=2, sort_keys=True)
    click.echo(f"final train loss: {history.epoch_losses[-1]:.6f}")


def _eval_config(cfg: dict) -> evaluation_mod.EvalConfig:
    return evaluation_mod.EvalConfig(
        metric=cfg.get("metric", "euclidean"),
        l2_normalize=cfg.get("l2_normalize", False),
        cross_camera_filter=cfg.get("cross_camera_filter", True),
        ranks=cfg.get("ranks", [1, 5, 10, 20]),
    )


@main.command("eval")
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True), required=True)
@click.option("--model", "model_dir", type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.pass_context
def eval_cmd(ctx, dataset_dir, model_dir, out_dir):
    """Evaluate retrieval: report.json + report.md (mAP, Rank-1/5/10/20)."""
    _, out_dir = _resolved(ctx, None, out_dir)
    try:
        ds = load_dataset(dataset_dir)
        params, fcfg, _ = load_checkpoint(model_dir)
        ecfg = _eval_config(ctx.obj["config"])
        report = evaluation_mod.evaluate(params, fcfg, ds, ecfg)
    except (DatasetError, ValueError, OSError) as e:
        _fail(str(e))
    evaluation_mod.write_report(report, out_dir)
    click.echo(f"mAP {report.mAP * 100:.1f}%  " +
               "  ".join(f"Rank-{k} {v * 100:.1f}%" for k, v in report.cmc.items()))


@main.command()
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True), required=True)
@click.option("--model", "model_dir", type=click.Path(exists=True), required=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.pass_context
def attribute(ctx, dataset_dir, model_dir, seed, out_dir):
    """Integrated-gradients attribution aggregated per feature block."""
    seed, out_dir = _resolved(ctx, seed, out_dir)
    cfg = ctx.obj["config"]
    try:
        ds = load_dataset(dataset_dir)
        params, fcfg, _ = load_checkpoint(model_dir)
        ig = attribution_mod.IGConfig(
            steps=cfg.get("steps", 50),
            sample_count=cfg.get("sample_count", 100),
            seed=cfg.get("seed", seed),
        )
        report = attribution_mod.aggregate_attributions(params, fcfg, ds, ig)
    except (DatasetError, ValueError, OSError) as e:
        _fail(str(e))
    attribution_mod.write_report(report, out_dir)
    for b in report.blocks:
        click.echo(f"{b.block}: +{b.positive:.4f} {b.negative:.4f} net {b.net:.4f}")


@main.command()
@click.option("--trajectories", "traj_path", type=click.Path(exists=True), required=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.option("--epochs", type=int, default=50)
@click.pass_context
def traj(ctx, traj_path, seed, out_dir, epochs):
    """Train the trajectory LSTM and export the trajectory feature block."""
    seed, out_dir = _resolved(ctx, seed, out_dir)
    try:
        samples = load_trajectories(traj_path)
        result = train_trajectory(samples, seed, epochs=epochs)
    except (ValueError, FloatingPointError) as e:
        _fail(str(e))
    os.makedirs(out_dir, exist_ok=True)
    export_feature_block(
        samples, result.model,
        os.path.join(out_dir, "trajectory.f32"),
        os.path.join(out_dir, "trajectory.fragment.json"),
    )
    with open(os.path.join(out_dir, "traj_training.json"), "w") as f:
        json.dump({
            "validation_mse": result.validation_mse,
            "loss_history": result.loss_history,
            "train_count": len(result.train_ids),
            "val_count": len(result.val_ids),
        }, f, indent=2, sort_keys=True)
    click.echo(f"validation MSE: {result.validation_mse:.6f}")


@main.command()
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True), required=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.pass_context
def experiment(ctx, dataset_dir, seed, out_dir):
    """Repeated-split ablation grid; writes experiment.{json,md,csv}."""
    seed, out_dir = _resolved(ctx, seed, out_dir)
    cfg = ctx.obj["config"]
    try:
        variants = cfg.get("variants", [[]])
        if not variants:
            raise ValueError("empty variant list")
        ecfg = ExperimentConfig(
            variants=variants,
            modes=cfg.get("modes", ["concat", "attention"]),
            repeats=cfg.get("repeats", 5),
            base_seed=cfg.get("base_seed", seed),
            train_fraction=cfg.get("train_fraction", 0.5),
            train=TrainConfig(**cfg.get("train", {})),
            eval=_eval_config(cfg.get("eval", {})),
        )
        ds = load_dataset(dataset_dir)
        report = run_experiment(ds, ecfg, out_dir=out_dir)
    except (DatasetError, ValueError, TypeError, RuntimeError) as e:
        _fail(str(e))
    for c in report.cells:
        click.echo(f"{c.variant}/{c.mode}: mAP {c.map_mean * 100:.1f}% "
                   f"(std {c.map_std * 100:.1f})")


if __name__ == "__main__":
    main()
