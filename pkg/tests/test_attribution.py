import numpy as np
import pytest

from auxfuse.attribution import (
    IGConfig,
    aggregate_attributions,
    attribute_record,
    block_boundaries,
    integrated_gradients,
)
from auxfuse.feature_store import (
    SplitSpec,
    SynthBlock,
    SynthSpec,
    split_random,
    synth_generate,
)
from auxfuse.fusion import FusionConfig, init_params
from auxfuse.numerics import seeded_rng
from auxfuse.trainer import TrainConfig, train_fusion


def linear_grad_fn(w, b):
    return lambda x: (float(w @ x + b), w.copy())


def test_linear_model_closed_form():
    rng = seeded_rng(1)
    w = rng.normal(size=6)
    x = rng.normal(size=6)
    x0 = rng.normal(size=6)
    for m in (1, 3, 50, 200):
        attr = integrated_gradients(linear_grad_fn(w, 0.5), x, x0, m)
        np.testing.assert_allclose(attr, w * (x - x0), atol=1e-12)


def test_baseline_equals_input():
    rng = seeded_rng(2)
    w = rng.normal(size=4)
    x = rng.normal(size=4)
    attr = integrated_gradients(linear_grad_fn(w, 0.0), x, x, 50)
    np.testing.assert_array_equal(attr, 0.0)


def test_baseline_dim_mismatch():
    with pytest.raises(ValueError, match="dimension mismatch"):
        integrated_gradients(linear_grad_fn(np.ones(3), 0.0),
                             np.ones(3), np.ones(4), 10)


def trained_attention_setup(seed=0):
    ds = synth_generate(
        SynthSpec(identities=8, cameras=2, samples_per_identity=6,
                  blocks=[SynthBlock("reid", 6), SynthBlock("tattoo", 4)],
                  noise=0.1),
        seed=seed,
    )
    ds = split_random(ds, SplitSpec(0.5, seed=seed))
    cfg = TrainConfig(epochs=25, batch_size=16, seed=seed, mode="attention",
                      aux_selection=["tattoo"])
    params, _ = train_fusion(ds, cfg)
    return ds, params, cfg.fusion_config()


def test_completeness_on_trained_nonlinear_model():
    ds, params, fcfg = trained_attention_setup()
    for r in ds.by_split("query")[:5]:
        _, residual = attribute_record(r, params, fcfg, IGConfig(steps=200))
        assert residual < 1e-3


def test_completeness_residual_shrinks_with_steps():
    ds, params, fcfg = trained_attention_setup(seed=3)
    queries = ds.by_split("query")[:6]
    res10 = [attribute_record(r, params, fcfg, IGConfig(steps=10))[1]
             for r in queries]
    res200 = [attribute_record(r, params, fcfg, IGConfig(steps=200))[1]
              for r in queries]
    assert np.mean(res200) <= np.mean(res10)


def test_concat_zero_weight_block_gets_zero_attribution():
    fcfg = FusionConfig(mode="concat", aux_selection=["tattoo"])
    params = init_params(6, [4], 3, fcfg, seed=1)
    params["cls_w"][:, 6:] = 0.0  # kill the tattoo segment
    from auxfuse.feature_store import FeatureRecord
    rng = seeded_rng(4)
    rec = FeatureRecord("q", 0, 0, "query",
                        {"reid": rng.normal(size=6), "tattoo": rng.normal(size=4)})
    attr, _ = attribute_record(rec, params, fcfg, IGConfig(steps=50))
    np.testing.assert_array_equal(attr[6:], 0.0)
    assert np.any(attr[:6] != 0.0)


def test_block_boundaries():
    ds = synth_generate(
        SynthSpec(identities=2, cameras=1, samples_per_identity=2,
                  blocks=[SynthBlock("reid", 6), SynthBlock("a", 2),
                          SynthBlock("b", 3)], noise=0.1),
        seed=0,
    )
    fcfg = FusionConfig(mode="concat", aux_selection=["b", "a"])
    assert block_boundaries(ds, fcfg) == [("reid", 0, 6), ("b", 6, 9), ("a", 9, 11)]


def informative_block_dataset(seed=0):
    # reid shares one global center; only the tattoo block separates identities
    ds = synth_generate(
        SynthSpec(identities=10, cameras=2, samples_per_identity=16,
                  blocks=[SynthBlock("reid", 8, "uninformative"),
                          SynthBlock("tattoo", 8, "informative", 10.0)],
                  noise=0.1),
        seed=seed,
    )
    return split_random(ds, SplitSpec(0.5, seed=seed))


def test_informative_block_dominates_attribution_mass():
    ds = informative_block_dataset()
    cfg = TrainConfig(epochs=80, batch_size=16, seed=0, mode="concat",
                      aux_selection=["tattoo"])
    params, _ = train_fusion(ds, cfg)
    report = aggregate_attributions(params, cfg.fusion_config(), ds,
                                    IGConfig(sample_count=100, seed=1))
    mass = {b.block: abs(b.positive) + abs(b.negative) for b in report.blocks}
    total = sum(mass.values())
    assert mass["tattoo"] / total > 0.8


def test_block_sums_partition_mean_attribution():
    ds, params, fcfg = trained_attention_setup(seed=5)
    report = aggregate_attributions(params, fcfg, ds, IGConfig(sample_count=8, seed=2))
    for b, (name, start, end) in zip(report.blocks, block_boundaries(ds, fcfg)):
        seg = report.mean_attribution[start:end]
        assert b.block == name
        assert abs(b.positive - seg[seg > 0].sum()) < 1e-12
        assert abs(b.negative - seg[seg < 0].sum()) < 1e-12
        assert abs((b.positive + b.negative) - b.net) < 1e-12
        assert abs(b.net - seg.sum()) < 1e-12


def test_sample_count_one():
    ds, params, fcfg = trained_attention_setup(seed=6)
    report = aggregate_attributions(params, fcfg, ds, IGConfig(sample_count=1, seed=3))
    assert len(report.sample_ids) == 1
    rec = next(r for r in ds.by_split("query") if r.sample_id == report.sample_ids[0])
    attr, _ = attribute_record(rec, params, fcfg, IGConfig(steps=50))
    np.testing.assert_array_equal(report.mean_attribution, attr)


def test_same_seed_identical_report():
    ds, params, fcfg = trained_attention_setup(seed=7)
    ig = IGConfig(sample_count=4, seed=9)
    r1 = aggregate_attributions(params, fcfg, ds, ig)
    r2 = aggregate_attributions(params, fcfg, ds, ig)
    assert r1.sample_ids == r2.sample_ids
    assert r1.mean_attribution.tobytes() == r2.mean_attribution.tobytes()


def test_config_validation():
    with pytest.raises(ValueError):
        IGConfig(steps=0)
    with pytest.raises(ValueError):
        IGConfig(sample_count=0)
