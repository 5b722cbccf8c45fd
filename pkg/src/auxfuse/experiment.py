"""Repeated-split experiment protocol with averaged reporting.

Each repeat r re-splits the dataset with seed base_seed + r, trains every
(variant, mode) combination, evaluates it, and the report aggregates mean
and standard deviation of mAP and each CMC rank over the repeats. The whole
pipeline is a pure function of (dataset, config, base seed).
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .evaluation import EvalConfig, EvalReport, evaluate, write_report
from .feature_store import Dataset, SplitSpec, split_random
from .trainer import TrainConfig, train_and_checkpoint, train_fusion


@dataclass
class ExperimentConfig:
    variants: list[list[str]] = field(default_factory=lambda: [[]])
    modes: list[str] = field(default_factory=lambda: ["concat", "attention"])
    repeats: int = 5
    base_seed: int = 0
    train_fraction: float = 0.5
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if not self.variants:
            raise ValueError("at least one auxiliary-selection variant required")
        if not self.modes:
            raise ValueError("at least one fusion mode required")


def variant_label(selection: list[str]) -> str:
    return "+".join(selection) if selection else "baseline"


@dataclass
class CellStats:
    variant: str
    mode: str
    map_mean: float
    map_std: float
    cmc_mean: dict[int, float]
    cmc_std: dict[int, float]


@dataclass
class ExperimentReport:
    cells: list[CellStats]
    raw: dict[str, list[dict]]  # "<variant>/<mode>" -> per-run report dicts
    config_echo: dict

    def cell(self, variant: str, mode: str) -> CellStats:
        for c in self.cells:
            if c.variant == variant and c.mode == mode:
                return c
        raise KeyError((variant, mode))

    def to_dict(self) -> dict:
        return {
            "config": self.config_echo,
            "cells": [
                {
                    "variant": c.variant,
                    "mode": c.mode,
                    "mAP": {"mean": c.map_mean, "std": c.map_std},
                    "cmc": {
                        str(k): {"mean": c.cmc_mean[k], "std": c.cmc_std[k]}
                        for k in sorted(c.cmc_mean)
                    },
                }
                for c in self.cells
            ],
            "raw": self.raw,
        }


def _aggregate(variant: str, mode: str, reports: list[EvalReport]) -> CellStats:
    maps = np.array([r.mAP for r in reports])
    ranks = sorted(reports[0].cmc)
    return CellStats(
        variant=variant,
        mode=mode,
        map_mean=float(maps.mean()),
        map_std=float(maps.std()),
        cmc_mean={k: float(np.mean([r.cmc[k] for r in reports])) for k in ranks},
        cmc_std={k: float(np.std([r.cmc[k] for r in reports])) for k in ranks},
    )


def run_experiment(dataset: Dataset, config: ExperimentConfig,
                   out_dir: str | None = None) -> ExperimentReport:
    per_cell: dict[tuple[str, str], list[EvalReport]] = {
        (variant_label(v), m): [] for v in config.variants for m in config.modes
    }
    raw: dict[str, list[dict]] = {f"{v}/{m}": [] for (v, m) in per_cell}

    for r in range(config.repeats):
        split_seed = config.base_seed + r
        split_ds = split_random(
            dataset, SplitSpec(train_fraction=config.train_fraction, seed=split_seed)
        )
        for selection in config.variants:
            vlabel = variant_label(selection)
            for mode in config.modes:
                tcfg = replace(
                    config.train,
                    mode=mode,
                    aux_selection=list(selection),
                    seed=config.base_seed * 1000003 + r,
                )
                try:
                    if out_dir is not None:
                        cell_dir = os.path.join(out_dir, "runs", str(r), vlabel, mode)
                        params, _ = train_and_checkpoint(split_ds, tcfg, cell_dir)
                    else:
                        params, _ = train_fusion(split_ds, tcfg)
                    report = evaluate(params, tcfg.fusion_config(), split_ds, config.eval)
                    if out_dir is not None:
                        write_report(report, cell_dir, label=f"{vlabel}-{mode}")
                except Exception as e:
                    raise RuntimeError(
                        f"experiment failed at repeat={r}, variant={vlabel}, "
                        f"mode={mode}: {e}"
                    ) from e
                per_cell[(vlabel, mode)].append(report)
                raw[f"{vlabel}/{mode}"].append(report.to_dict())

    cells = [
        _aggregate(v, m, reports) for (v, m), reports in per_cell.items()
    ]
    echo = {
        "variants": [variant_label(v) for v in config.variants],
        "modes": list(config.modes),
        "repeats": config.repeats,
        "base_seed": config.base_seed,
        "train_fraction": config.train_fraction,
        "train": config.train.echo(),
        "eval": {
            "metric": config.eval.metric,
            "l2_normalize": config.eval.l2_normalize,
            "cross_camera_filter": config.eval.cross_camera_filter,
            "ranks": list(config.eval.ranks),
        },
    }
    report = ExperimentReport(cells=cells, raw=raw, config_echo=echo)
    if out_dir is not None:
        emit_report(report, out_dir)
    return report


def report_markdown(report: ExperimentReport) -> str:
    """Variants as row groups, modes as columns — the paper-style table."""
    ranks = sorted(report.cells[0].cmc_mean) if report.cells else []
    header = "| Variant | Mode | mAP | " + " | ".join(f"Rank-{k}" for k in ranks) + " |"
    lines = [header, "|" + "---|" * (len(ranks) + 3)]
    for c in report.cells:
        cells = [f"{c.map_mean * 100:.1f}%"]
        cells += [f"{c.cmc_mean[k] * 100:.1f}%" for k in ranks]
        lines.append(f"| {c.variant} | {c.mode} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def emit_report(report: ExperimentReport, out_dir: str,
                formats: tuple[str, ...] = ("json", "markdown", "csv")) -> None:
    os.makedirs(out_dir, exist_ok=True)
    if "json" in formats:
        with open(os.path.join(out_dir, "experiment.json"), "w") as f:
            json.dump(report.to_dict(), f, indent=2, sort_keys=True)
    if "markdown" in formats:
        with open(os.path.join(out_dir, "experiment.md"), "w") as f:
            f.write(report_markdown(report))
    if "csv" in formats:
        ranks = sorted(report.cells[0].cmc_mean) if report.cells else []
        with open(os.path.join(out_dir, "experiment.csv"), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["variant", "mode", "map_mean", "map_std"]
                       + [f"rank{k}_mean" for k in ranks]
                       + [f"rank{k}_std" for k in ranks])
            for c in report.cells:
                w.writerow([c.variant, c.mode, repr(c.map_mean), repr(c.map_std)]
                           + [repr(c.cmc_mean[k]) for k in ranks]
                           + [repr(c.cmc_std[k]) for k in ranks])
