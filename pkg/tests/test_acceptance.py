"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines. Criteria are property-based plus synthetic reproductions; tolerances
are pinned in the assertions.
"""

import json
import time

import numpy as np
import pytest

from auxfuse.attribution import (
    IGConfig,
    aggregate_attributions,
    attribute_record,
    integrated_gradients,
)
from auxfuse.evaluation import EvalConfig, evaluate, evaluate_descriptors
from auxfuse.experiment import ExperimentConfig, run_experiment
from auxfuse.feature_store import (
    FeatureRecord,
    SplitSpec,
    SynthBlock,
    SynthSpec,
    split_random,
    synth_generate,
)
from auxfuse.fusion import (
    FusionConfig,
    backward,
    forward,
    forward_batch,
    init_params,
)
from auxfuse.numerics import finite_diff_grad, relative_error, seeded_rng
from auxfuse.trainer import TrainConfig, train_fusion
from auxfuse.trajectory import init_model, loss_and_grads, _rollout


def report(name, ok, detail=""):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" — {detail}" if detail else ""))
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# Criterion 1: gradient correctness, both fusion modes, encoder hidden 0/16,
# plus the 10-step LSTM; rel. error < 1e-4 over >= 20 seeds; < 30 s.

def test_gradient_correctness():
    t0 = time.time()
    worst = 0.0
    reid, a = 5, 4
    for seed in range(20):
        mode = ("concat", "attention")[seed % 2]
        hidden = (0, 16)[(seed // 2) % 2]
        cfg = FusionConfig(mode=mode, aux_selection=["a"], encoder_hidden=hidden)
        params = init_params(reid, [a], 2, cfg, seed=seed)
        rng = seeded_rng(seed + 300)
        recs = [FeatureRecord(f"r{i}", i % 2, 0, "train",
                              {"reid": rng.normal(size=reid),
                               "a": rng.normal(size=a)})
                for i in range(4)]
        labels = [i % 2 for i in range(4)]
        _, grads = backward(recs, labels, params, cfg)
        R = np.stack([r.blocks["reid"] for r in recs])
        A = np.stack([r.blocks["a"] for r in recs])
        for name in params:
            def f(x, name=name):
                saved = params[name]
                params[name] = x
                loss, _ = forward_batch(R, A, params, cfg, np.array(labels))
                params[name] = saved
                return loss
            fd = finite_diff_grad(f, params[name].copy())
            worst = max(worst, relative_error(grads[name], fd))

    for seed in range(20):
        model = init_model(seed, hidden=4)
        rng = seeded_rng(seed + 600)
        obs = rng.uniform(size=(2, 10, 2))
        tgt = rng.uniform(size=(2, 10, 2))
        _, grads = loss_and_grads(obs, tgt, model)
        for name in model:
            def f(x, name=name):
                saved = model[name]
                model[name] = x
                P = _rollout(obs, model)
                model[name] = saved
                return float(np.mean((P - tgt) ** 2))
            fd = finite_diff_grad(f, model[name].copy())
            worst = max(worst, relative_error(grads[name], fd))
    elapsed = time.time() - t0
    report("gradient correctness (fusion + LSTM, 20 seeds)",
           worst < 1e-4 and elapsed < 30,
           f"worst rel. err {worst:.2e}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# Criterion 2: attention normalization invariants.

def test_attention_normalization_invariants():
    cfg = FusionConfig(mode="attention", aux_selection=["a"])
    params = init_params(5, [4], 3, cfg, seed=1)
    rng = seeded_rng(9)
    rec = FeatureRecord("q", 0, 0, "train",
                        {"reid": rng.normal(size=5), "a": rng.normal(size=4)})
    t1 = forward(rec, params, cfg, label=0)
    ok = abs(t1.weights.sum() - 1.0) < 1e-12

    params["att_b"] = params["att_b"] + 11.3  # constant shift of every score
    t2 = forward(rec, params, cfg, label=0)
    ok &= bool(np.all(np.abs(t2.weights - t1.weights) < 1e-9))
    ok &= bool(np.all(np.abs(t2.reweighted - t1.reweighted) < 1e-9))
    ok &= abs(t2.loss - t1.loss) < 1e-9

    params["att_w"][:] = 0.0
    params["att_b"][:] = 0.0
    t3 = forward(rec, params, cfg)
    d = 9
    ok &= bool(np.array_equal(t3.reweighted, t3.fused * np.full(d, 1.0 / d)))
    report("attention normalization invariants", ok)


# ---------------------------------------------------------------------------
# Criterion 3: metric oracle equivalence on 200 random instances + hand case.

def brute_force(q_desc, q_ids, q_cams, g_desc, g_ids, g_cams, config):
    aps, firsts, excluded = [], [], 0
    for qi in range(len(q_desc)):
        entries = []
        for gi in range(len(g_desc)):
            if config.cross_camera_filter and g_ids[gi] == q_ids[qi] \
                    and g_cams[gi] == q_cams[qi]:
                continue
            d = sum((x - y) ** 2 for x, y in zip(q_desc[qi], g_desc[gi])) ** 0.5
            entries.append((d, gi))
        entries.sort(key=lambda e: (e[0], e[1]))
        rel = [g_ids[gi] == q_ids[qi] for _, gi in entries]
        if not any(rel):
            excluded += 1
            continue
        hits, ap = 0, 0.0
        for k, is_rel in enumerate(rel, start=1):
            if is_rel:
                hits += 1
                ap += hits / k
        aps.append(ap / hits)
        firsts.append(rel.index(True) + 1)
    if not firsts:
        return None, None, excluded
    cmc = {k: sum(f <= k for f in firsts) / len(firsts) for k in config.ranks}
    return sum(aps) / len(aps), cmc, excluded


def test_metric_oracle():
    from auxfuse.evaluation import average_precision
    hand = average_precision([True, False, True, False, False])
    ok = abs(hand - (1 + 2 / 3) / 2) < 1e-15

    worst = 0.0
    for seed in range(200):
        rng = seeded_rng(seed + 5000)
        nq, ng = int(rng.integers(1, 21)), int(rng.integers(5, 51))
        dim = int(rng.integers(1, 9))
        q_desc = rng.normal(size=(nq, dim))
        g_desc = rng.normal(size=(ng, dim))
        q_ids = rng.integers(0, 6, size=nq)
        g_ids = rng.integers(0, 6, size=ng)
        q_cams = rng.integers(0, 3, size=nq)
        g_cams = rng.integers(0, 3, size=ng)
        cfg = EvalConfig(cross_camera_filter=seed % 2 == 0)
        mAP, cmc, excluded = brute_force(q_desc, q_ids, q_cams,
                                         g_desc, g_ids, g_cams, cfg)
        try:
            rep = evaluate_descriptors(q_desc, q_ids, q_cams,
                                       [f"q{i}" for i in range(nq)],
                                       g_desc, g_ids, g_cams, cfg)
        except ValueError:
            ok &= excluded == nq
            continue
        worst = max(worst, abs(rep.mAP - mAP))
        worst = max(worst, max(abs(rep.cmc[k] - cmc[k]) for k in cfg.ranks))
        ok &= len(rep.excluded_queries) == excluded
    ok &= worst < 1e-12
    report("metric oracle equivalence (200 instances)", ok,
           f"worst |delta| {worst:.2e}, hand AP {hand:.5f}")


# ---------------------------------------------------------------------------
# Criterion 4: integrated-gradients axioms.

def test_ig_axioms():
    rng = seeded_rng(17)
    w = rng.normal(size=8)
    x = rng.normal(size=8)
    x0 = rng.normal(size=8)
    linear = lambda p: (float(w @ p), w.copy())
    ok = True
    for m in (1, 7, 50, 200):
        attr = integrated_gradients(linear, x, x0, m)
        ok &= bool(np.all(np.abs(attr - w * (x - x0)) < 1e-12))
    ok &= bool(np.all(integrated_gradients(linear, x, x, 50) == 0.0))

    # completeness on a trained nonlinear (attention) model
    # unit-scale features: the right-Riemann curvature error at m=200 stays
    # inside the 1e-3 relative budget
    ds = synth_generate(
        SynthSpec(identities=8, cameras=2, samples_per_identity=8,
                  blocks=[SynthBlock("reid", 6), SynthBlock("tattoo", 4)],
                  noise=0.1),
        seed=21,
    )
    ds = split_random(ds, SplitSpec(0.5, seed=21))
    cfg = TrainConfig(epochs=30, batch_size=16, seed=21, mode="attention",
                      aux_selection=["tattoo"])
    params, _ = train_fusion(ds, cfg)
    worst_res = 0.0
    for rec in ds.by_split("query")[:8]:
        _, res = attribute_record(rec, params, cfg.fusion_config(),
                                  IGConfig(steps=200))
        worst_res = max(worst_res, res)
    ok &= worst_res < 1e-3
    report("integrated-gradients axioms", ok,
           f"worst completeness residual {worst_res:.2e} at m=200")


# ---------------------------------------------------------------------------
# Criterion 5: auxiliary-information claim, synthetic reproduction.

def test_auxiliary_information_claim():
    t0 = time.time()
    ds = synth_generate(
        SynthSpec(identities=16, cameras=2, samples_per_identity=8,
                  blocks=[SynthBlock("reid", 8, "pair_confusable", 10.0),
                          SynthBlock("tattoo", 8, "informative", 10.0)],
                  noise=0.5),
        seed=42,
    )
    cfg = ExperimentConfig(
        variants=[[], ["tattoo"]],
        modes=["concat", "attention"],
        repeats=5,
        base_seed=7,
        train_fraction=0.5,
        train=TrainConfig(epochs=40, batch_size=16),
        eval=EvalConfig(),
    )
    rep = run_experiment(ds, cfg)
    gaps = {}
    for mode in ("concat", "attention"):
        gaps[mode] = rep.cell("tattoo", mode).map_mean \
            - rep.cell("baseline", mode).map_mean
    ok = all(g >= 0.10 for g in gaps.values())

    # IG mass: train one model per mode on a fixed split, check > 50% on tattoo
    sds = split_random(ds, SplitSpec(0.5, seed=7))
    masses = {}
    for mode in ("concat", "attention"):
        tcfg = TrainConfig(epochs=40, batch_size=16, seed=7, mode=mode,
                           aux_selection=["tattoo"])
        params, _ = train_fusion(sds, tcfg)
        ar = aggregate_attributions(params, tcfg.fusion_config(), sds,
                                    IGConfig(sample_count=100, seed=1))
        mass = {b.block: abs(b.positive) + abs(b.negative) for b in ar.blocks}
        masses[mode] = mass["tattoo"] / sum(mass.values())
    ok &= all(m > 0.5 for m in masses.values())
    elapsed = time.time() - t0
    ok &= elapsed < 120
    report("auxiliary-information claim (synthetic)", ok,
           f"mAP gaps {gaps['concat']:.3f}/{gaps['attention']:.3f}, "
           f"IG mass {masses['concat']:.2f}/{masses['attention']:.2f}, "
           f"{elapsed:.1f}s")


# ---------------------------------------------------------------------------
# Criterion 6: training-recipe conformance.

def test_training_recipe_conformance():
    echo = TrainConfig().echo()
    ok = echo["lr"] == 0.0003 and echo["epochs"] == 100 and echo["batch_size"] == 32
    ok &= TrainConfig(regime="video").echo()["batch_size"] == 5

    ds = synth_generate(
        SynthSpec(identities=10, cameras=2, samples_per_identity=64,
                  blocks=[SynthBlock("reid", 8, "informative", 10.0)],
                  noise=0.5),
        seed=0,
    )
    ds = split_random(ds, SplitSpec(0.5, seed=0))
    cfg = TrainConfig(seed=1, mode="concat")  # all recipe defaults
    params, history = train_fusion(ds, cfg)
    rep = evaluate(params, cfg.fusion_config(), ds, EvalConfig())
    ok &= history.epoch_losses[-1] < 0.1
    ok &= rep.cmc[1] >= 0.99
    report("training-recipe conformance", ok,
           f"final loss {history.epoch_losses[-1]:.4f}, Rank-1 {rep.cmc[1]:.3f}")


# ---------------------------------------------------------------------------
# Criterion 7: end-to-end determinism.

def test_end_to_end_determinism(tmp_path):
    ds = synth_generate(
        SynthSpec(identities=8, cameras=2, samples_per_identity=6,
                  blocks=[SynthBlock("reid", 6, "informative", 5.0),
                          SynthBlock("audio", 3)],
                  noise=0.2),
        seed=11,
    )
    cfg = ExperimentConfig(
        variants=[[], ["audio"]],
        modes=["concat", "attention"],
        repeats=2,
        base_seed=3,
        train_fraction=0.5,
        train=TrainConfig(epochs=4, batch_size=16),
        eval=EvalConfig(),
    )
    run_experiment(ds, cfg, out_dir=str(tmp_path / "run1"))
    run_experiment(ds, cfg, out_dir=str(tmp_path / "run2"))
    b1 = (tmp_path / "run1" / "experiment.json").read_bytes()
    b2 = (tmp_path / "run2" / "experiment.json").read_bytes()
    report("end-to-end determinism", b1 == b2,
           f"experiment.json {len(b1)} bytes, byte-identical: {b1 == b2}")
