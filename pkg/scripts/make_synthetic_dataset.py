#!/usr/bin/env python3
"""Generate a synthetic feature-block dataset plus matching trajectories.

Example:
    python3 scripts/make_synthetic_dataset.py --out /tmp/synth --seed 7
"""

import argparse

import numpy as np

from auxfuse.feature_store import (
    SplitSpec,
    SynthBlock,
    SynthSpec,
    split_random,
    synth_generate,
)
from auxfuse.numerics import seeded_rng
from auxfuse.trajectory import TrajectorySample, save_trajectories


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", required=True)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--identities", type=int, default=16)
    ap.add_argument("--samples-per-identity", type=int, default=8)
    ap.add_argument("--noise", type=float, default=0.5)
    ap.add_argument("--split-fraction", type=float, default=0.5)
    args = ap.parse_args()

    spec = SynthSpec(
        identities=args.identities,
        cameras=2,
        samples_per_identity=args.samples_per_identity,
        blocks=[
            SynthBlock("reid", 8, "pair_confusable", 10.0),
            SynthBlock("tattoo", 8, "informative", 10.0),
            SynthBlock("audio", 4, "uninformative"),
        ],
        noise=args.noise,
    )
    ds = synth_generate(spec, args.seed)
    ds = split_random(ds, SplitSpec(args.split_fraction, seed=args.seed))
    from auxfuse.feature_store import save_dataset
    save_dataset(ds, args.out)

    # one straight-line trajectory per sample, id-aligned with the manifest
    rng = seeded_rng(args.seed + 1)
    samples = []
    for r in ds.records:
        start = rng.uniform(0.05, 0.35, size=2)
        vel = rng.uniform(0.005, 0.03, size=2)
        pts = start + np.arange(20)[:, None] * vel
        samples.append(TrajectorySample(r.sample_id, pts))
    save_trajectories(samples, f"{args.out}/trajectories.jsonl")
    print(f"wrote {len(ds.records)} samples to {args.out}")


if __name__ == "__main__":
    main()
