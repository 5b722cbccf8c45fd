"""Datasets of per-sample feature blocks: load, validate, split, synthesize.

On-disk layout of a dataset directory:

    manifest.json   {"version": 1, "blocks": [{"name", "dim"}, ...],
                     "samples": [{"id", "identity", "camera", "split"}, ...]}
    <block>.f32     N x dim float32, little-endian, row-major; row i of every
                    block file belongs to samples[i]

Blocks are stored as float32; everything is promoted to float64 in memory.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .numerics import seeded_rng

KNOWN_ROLES = {"reid", "logo", "age_gender", "clothing", "tattoo", "audio", "trajectory"}

SPLITS = ("train", "query", "gallery")


class DatasetError(ValueError):
    """Raised for any manifest/payload inconsistency, with file context."""


@dataclass(frozen=True)
class BlockSchema:
    name: str
    dim: int

    def __post_init__(self):
        if not self.name:
            raise DatasetError("block name must be non-empty")
        if self.dim < 1:
            raise DatasetError(f"block {self.name!r}: dim must be >= 1, got {self.dim}")


@dataclass
class FeatureRecord:
    sample_id: str
    identity_id: int
    camera_id: int
    split: str
    blocks: dict[str, np.ndarray]


@dataclass
class Dataset:
    schema: list[BlockSchema]
    records: list[FeatureRecord]

    @property
    def num_identities(self) -> int:
        return len({r.identity_id for r in self.records})

    def block_dim(self, name: str) -> int:
        for b in self.schema:
            if b.name == name:
                return b.dim
        raise DatasetError(f"unknown block {name!r}")

    def by_split(self, split: str) -> list[FeatureRecord]:
        return [r for r in self.records if r.split == split]

    def validate(self) -> None:
        names = [b.name for b in self.schema]
        if len(set(names)) != len(names):
            raise DatasetError("duplicate block names in schema")
        seen = set()
        dims = {b.name: b.dim for b in self.schema}
        for r in self.records:
            if r.sample_id in seen:
                raise DatasetError(f"duplicate sample_id {r.sample_id!r}")
            seen.add(r.sample_id)
            if r.split not in SPLITS:
                raise DatasetError(f"sample {r.sample_id!r}: bad split {r.split!r}")
            if r.identity_id < 0 or r.camera_id < 0:
                raise DatasetError(f"sample {r.sample_id!r}: negative identity/camera")
            for name, vec in r.blocks.items():
                if name not in dims:
                    raise DatasetError(f"sample {r.sample_id!r}: unknown block {name!r}")
                if vec.shape != (dims[name],):
                    raise DatasetError(
                        f"sample {r.sample_id!r} block {name!r}: "
                        f"length {vec.shape} != dim {dims[name]}"
                    )
                if not np.all(np.isfinite(vec)):
                    raise DatasetError(
                        f"sample {r.sample_id!r} block {name!r}: NaN/Inf payload"
                    )
        # query identities must be findable in the gallery
        gallery_ids = {r.identity_id for r in self.records if r.split == "gallery"}
        for r in self.records:
            if r.split == "query" and r.identity_id not in gallery_ids:
                raise DatasetError(
                    f"query identity {r.identity_id} has no gallery record"
                )


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float
    seed: int
    mode: str = "by_identity"


def load_dataset(path: str) -> Dataset:
    manifest_path = os.path.join(path, "manifest.json")
    if not os.path.isfile(manifest_path):
        raise DatasetError(f"missing file: {manifest_path}")
    with open(manifest_path) as f:
        manifest = json.load(f)
    schema = [BlockSchema(b["name"], int(b["dim"])) for b in manifest["blocks"]]
    samples = manifest["samples"]
    n = len(samples)

    block_data = {}
    for b in schema:
        fpath = os.path.join(path, f"{b.name}.f32")
        if not os.path.isfile(fpath):
            raise DatasetError(f"missing file: {fpath}")
        size = os.path.getsize(fpath)
        expected = n * b.dim * 4
        if size != expected:
            raise DatasetError(
                f"dim mismatch in {fpath}: {size} bytes, expected {expected} "
                f"({n} samples x {b.dim} dims x 4)"
            )
        raw = np.fromfile(fpath, dtype="<f4").reshape(n, b.dim)
        bad = np.argwhere(~np.isfinite(raw))
        if bad.size:
            i, j = bad[0]
            raise DatasetError(
                f"NaN payload in {fpath} at row {i}, offset {(i * b.dim + j) * 4}"
            )
        block_data[b.name] = raw.astype(np.float64)

    records = []
    for i, s in enumerate(samples):
        records.append(
            FeatureRecord(
                sample_id=str(s["id"]),
                identity_id=int(s["identity"]),
                camera_id=int(s["camera"]),
                split=str(s["split"]),
                blocks={b.name: block_data[b.name][i] for b in schema},
            )
        )
    ds = Dataset(schema=schema, records=records)
    ds.validate()
    return ds


def save_dataset(dataset: Dataset, path: str) -> None:
    os.makedirs(path, exist_ok=True)
    manifest = {
        "version": 1,
        "blocks": [{"name": b.name, "dim": b.dim} for b in dataset.schema],
        "samples": [
            {
                "id": r.sample_id,
                "identity": r.identity_id,
                "camera": r.camera_id,
                "split": r.split,
            }
            for r in dataset.records
        ],
    }
    with open(os.path.join(path, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    for b in dataset.schema:
        mat = np.stack([r.blocks[b.name] for r in dataset.records]) if dataset.records \
            else np.zeros((0, b.dim))
        mat.astype("<f4").tofile(os.path.join(path, f"{b.name}.f32"))


def assemble_aux(record: FeatureRecord, selection: list[str]) -> np.ndarray:
    """Concatenate the selected auxiliary blocks in order.

    Empty selection is legal and yields a length-0 vector (the no-auxiliary
    baseline). "reid" is never an auxiliary block.
    """
    if "reid" in selection:
        raise DatasetError("'reid' cannot appear in an auxiliary selection")
    parts = []
    for name in selection:
        if name not in record.blocks:
            raise DatasetError(f"unknown block {name!r} in selection")
        parts.append(record.blocks[name])
    if not parts:
        return np.zeros(0, dtype=np.float64)
    return np.concatenate(parts)


def split_random(dataset: Dataset, spec: SplitSpec) -> Dataset:
    """Reassign splits with an identity-disjoint train/test partition.

    Test identities get per-(identity, camera) one query record (first by
    sample_id), the rest gallery. Deterministic for a fixed seed.
    """
    idents = sorted({r.identity_id for r in dataset.records})
    if len(idents) < 2:
        raise DatasetError("need >= 2 identities to split")
    rng = seeded_rng(spec.seed)
    perm = rng.permutation(len(idents))
    n_train = int(round(spec.train_fraction * len(idents)))
    if n_train == 0:
        raise DatasetError("train_fraction yields an empty train side")
    train_ids = {idents[i] for i in perm[:n_train]}

    records = []
    # first record per (identity, camera) by sample_id order becomes the query
    first_of_group: dict[tuple[int, int], str] = {}
    for r in sorted(dataset.records, key=lambda r: r.sample_id):
        key = (r.identity_id, r.camera_id)
        if r.identity_id not in train_ids and key not in first_of_group:
            first_of_group[key] = r.sample_id
    for r in dataset.records:
        if r.identity_id in train_ids:
            split = "train"
        elif first_of_group.get((r.identity_id, r.camera_id)) == r.sample_id:
            split = "query"
        else:
            split = "gallery"
        records.append(
            FeatureRecord(r.sample_id, r.identity_id, r.camera_id, split, r.blocks)
        )
    out = Dataset(schema=dataset.schema, records=records)
    # queries whose identity has no gallery record degrade evaluation, not
    # splitting: demote them to gallery (single-record identities).
    gallery_counts: dict[int, int] = {}
    for r in out.records:
        if r.split == "gallery":
            gallery_counts[r.identity_id] = gallery_counts.get(r.identity_id, 0) + 1
    for r in out.records:
        if r.split == "query" and gallery_counts.get(r.identity_id, 0) == 0:
            r.split = "gallery"
    out.validate()
    return out


# synthetic data -------------------------------------------------------------

BLOCK_MODES = ("informative", "uninformative", "pair_confusable")


@dataclass(frozen=True)
class SynthBlock:
    name: str
    dim: int
    mode: str = "informative"
    scale: float = 1.0  # multiplies cluster centers, not the noise

    def __post_init__(self):
        if self.mode not in BLOCK_MODES:
            raise DatasetError(f"block {self.name!r}: bad mode {self.mode!r}")


@dataclass
class SynthSpec:
    identities: int
    cameras: int
    samples_per_identity: int
    blocks: list[SynthBlock] = field(default_factory=list)
    noise: float = 0.1

    def __post_init__(self):
        if min(self.identities, self.cameras, self.samples_per_identity) < 1:
            raise DatasetError("all synth counts must be positive")
        if not self.blocks:
            raise DatasetError("synth spec needs at least one block")


def synth_generate(spec: SynthSpec, seed: int) -> Dataset:
    """Gaussian identity clusters per block; deterministic per seed.

    Block modes:
      informative      one cluster center per identity
      uninformative    a single global center shared by all identities
      pair_confusable  identities 2k and 2k+1 share a center, so the block
                       cannot tell the members of a pair apart
    """
    rng = seeded_rng(seed)
    centers: dict[str, np.ndarray] = {}
    for b in spec.blocks:
        if b.mode == "informative":
            c = rng.normal(size=(spec.identities, b.dim))
        elif b.mode == "uninformative":
            c = np.tile(rng.normal(size=(1, b.dim)), (spec.identities, 1))
        else:  # pair_confusable
            n_pairs = (spec.identities + 1) // 2
            pc = rng.normal(size=(n_pairs, b.dim))
            c = pc[np.arange(spec.identities) // 2]
        centers[b.name] = c * b.scale

    schema = [BlockSchema(b.name, b.dim) for b in spec.blocks]
    records = []
    for ident in range(spec.identities):
        for j in range(spec.samples_per_identity):
            blocks = {}
            for b in spec.blocks:
                vec = centers[b.name][ident]
                if spec.noise > 0:
                    vec = vec + spec.noise * rng.normal(size=b.dim)
                blocks[b.name] = np.array(vec, dtype=np.float64)
            records.append(
                FeatureRecord(
                    sample_id=f"s{ident:04d}_{j:03d}",
                    identity_id=ident,
                    camera_id=j % spec.cameras,
                    split="train",
                    blocks=blocks,
                )
            )
    ds = Dataset(schema=schema, records=records)
    ds.validate()
    return ds
