"""Training loop for the fusion model.

Recipe defaults: Adam, learning rate 0.0003, 100 epochs, batch size 32 for
the image regime and 5 for the video regime. Softmax (cross-entropy over
training identities) loss; train identities are densely re-indexed
0..C_train-1.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .feature_store import Dataset
from .fusion import FusionConfig, backward, init_params, save_checkpoint
from .numerics import Adam, seeded_rng

REGIME_BATCH = {"image": 32, "video": 5}


@dataclass
class TrainConfig:
    epochs: int = 100
    lr: float = 3e-4
    regime: str = "image"
    batch_size: int | None = None  # None: resolved from regime (32 image, 5 video)
    seed: int = 0
    mode: str = "concat"
    aux_selection: list[str] = field(default_factory=list)
    encoder_hidden: int = 0
    attention_bias: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.regime not in REGIME_BATCH:
            raise ValueError(f"bad regime {self.regime!r}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    @property
    def effective_batch_size(self) -> int:
        return self.batch_size if self.batch_size is not None else REGIME_BATCH[self.regime]

    def fusion_config(self) -> FusionConfig:
        return FusionConfig(
            mode=self.mode,
            aux_selection=list(self.aux_selection),
            encoder_hidden=self.encoder_hidden,
            attention_bias=self.attention_bias,
        )

    def echo(self) -> dict:
        """Effective config values, for the emitted config echo."""
        return {
            "epochs": self.epochs,
            "lr": self.lr,
            "regime": self.regime,
            "batch_size": self.effective_batch_size,
            "seed": self.seed,
            "mode": self.mode,
            "aux_selection": list(self.aux_selection),
            "encoder_hidden": self.encoder_hidden,
            "attention_bias": self.attention_bias,
        }


@dataclass
class TrainHistory:
    epoch_losses: list[float]
    label_map: dict[int, int]


def batch_iter(n: int, batch_size: int, epoch: int, seed: int) -> list[np.ndarray]:
    """Seeded shuffle of 0..n-1 cut into batches; the short tail is kept."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    perm = seeded_rng(seed ^ (epoch + 0x9E3779B9)).permutation(n)
    return [perm[i:i + batch_size] for i in range(0, n, batch_size)]


def train_fusion(dataset: Dataset, config: TrainConfig):
    """Returns (params, TrainHistory). Deterministic for a fixed seed."""
    train = dataset.by_split("train")
    if not train:
        raise ValueError("empty train split")
    idents = sorted({r.identity_id for r in train})
    if len(idents) < 2:
        raise ValueError("need >= 2 train identities")
    label_map = {ident: i for i, ident in enumerate(idents)}
    labels = np.array([label_map[r.identity_id] for r in train])

    fcfg = config.fusion_config()
    reid_dim = dataset.block_dim("reid")
    aux_dims = [dataset.block_dim(n) for n in fcfg.aux_selection]
    params = init_params(reid_dim, aux_dims, len(idents), fcfg, config.seed)
    opt = Adam(lr=config.lr)

    bs = config.effective_batch_size
    epoch_losses = []
    for epoch in range(config.epochs):
        losses = []
        for bi, idx in enumerate(batch_iter(len(train), bs, epoch, config.seed)):
            batch = [train[i] for i in idx]
            loss, grads = backward(batch, labels[idx].tolist(), params, fcfg)
            if not np.isfinite(loss):
                raise FloatingPointError(
                    f"non-finite loss at epoch {epoch}, batch {bi}"
                )
            opt.step(params, grads)
            losses.append(loss)
        epoch_losses.append(float(np.mean(losses)))

    return params, TrainHistory(epoch_losses=epoch_losses, label_map=label_map)


def write_history(history: TrainHistory, path: str) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "loss"])
        for i, loss in enumerate(history.epoch_losses):
            w.writerow([i, repr(loss)])


def train_and_checkpoint(dataset: Dataset, config: TrainConfig, out_dir: str):
    """Train, then write model.json/model.f32 and history.csv under out_dir."""
    params, history = train_fusion(dataset, config)
    os.makedirs(out_dir, exist_ok=True)
    save_checkpoint(out_dir, params, config.fusion_config(),
                    meta={"train_config": config.echo()})
    write_history(history, os.path.join(out_dir, "history.csv"))
    return params, history
