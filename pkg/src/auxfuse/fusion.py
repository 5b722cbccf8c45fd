"""Trainable fusion head with a hand-derived backward pass.

Forward chain, per sample:

    reid_enc = encoder(reid block)          identity map, or 2-layer ReLU MLP
    fused    = [reid_enc, aux blocks]       length d
    concat    mode: classifier input z = fused
    attention mode: scores = W_a fused + b_a, weights = softmax(scores),
                    z = fused * weights  (element-wise)
    logits = W_c z + b_c, loss = cross-entropy over identities

Gradients are derived by hand (no autodiff); the finite-difference oracle in
numerics checks every parameter.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .feature_store import Dataset, FeatureRecord, assemble_aux
from .numerics import log_softmax, seeded_rng, softmax

MODES = ("concat", "attention")


@dataclass
class FusionConfig:
    mode: str = "concat"
    aux_selection: list[str] = field(default_factory=list)
    encoder_hidden: int = 0
    attention_bias: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"bad fusion mode {self.mode!r}")
        if self.encoder_hidden < 0:
            raise ValueError("encoder_hidden must be >= 0")


def fused_dim(dataset_or_schema, config: FusionConfig) -> int:
    ds = dataset_or_schema
    return ds.block_dim("reid") + sum(ds.block_dim(n) for n in config.aux_selection)


def init_params(
    reid_dim: int, aux_dims: list[int], num_classes: int, config: FusionConfig, seed: int
) -> dict[str, np.ndarray]:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases."""
    rng = seeded_rng(seed)
    d = reid_dim + sum(aux_dims)
    params: dict[str, np.ndarray] = {}

    def uniform(shape, fan_in):
        s = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-s, s, size=shape)

    h = config.encoder_hidden
    if h > 0:
        params["enc_w1"] = uniform((h, reid_dim), reid_dim)
        params["enc_b1"] = np.zeros(h)
        params["enc_w2"] = uniform((reid_dim, h), h)
        params["enc_b2"] = np.zeros(reid_dim)
    if config.mode == "attention":
        params["att_w"] = uniform((d, d), d)
        if config.attention_bias:
            params["att_b"] = np.zeros(d)
    params["cls_w"] = uniform((num_classes, d), d)
    params["cls_b"] = np.zeros(num_classes)
    return params


@dataclass
class ForwardTrace:
    reid: np.ndarray
    aux: np.ndarray
    fused: np.ndarray           # Theta* = [encoded reid, aux]
    scores: np.ndarray | None   # alpha (attention mode only)
    weights: np.ndarray | None  # beta = softmax(alpha)
    reweighted: np.ndarray | None  # Theta~ = Theta* * beta
    logits: np.ndarray
    probabilities: np.ndarray
    loss: float | None


def _record_inputs(record: FeatureRecord, config: FusionConfig):
    if "reid" not in record.blocks:
        raise ValueError(f"sample {record.sample_id!r} lacks a 'reid' block")
    return record.blocks["reid"], assemble_aux(record, config.aux_selection)


def _encode_batch(R: np.ndarray, params: dict, config: FusionConfig):
    """Returns (encoded, cache) — cache holds pre-activations for backward."""
    if config.encoder_hidden == 0:
        return R, None
    z1 = R @ params["enc_w1"].T + params["enc_b1"]
    a1 = np.maximum(z1, 0.0)
    enc = a1 @ params["enc_w2"].T + params["enc_b2"]
    return enc, (z1, a1)


def forward_batch(
    R: np.ndarray,
    A: np.ndarray,
    params: dict,
    config: FusionConfig,
    labels: np.ndarray | None = None,
):
    """Vectorized forward over a batch; returns (loss_or_None, cache dict)."""
    enc, enc_cache = _encode_batch(R, params, config)
    S = np.hstack([enc, A]) if A.size else enc  # Theta*
    if config.mode == "attention":
        alpha = S @ params["att_w"].T
        if "att_b" in params:
            alpha = alpha + params["att_b"]
        beta = softmax(alpha)
        Z = S * beta
    else:
        alpha = beta = None
        Z = S
    logits = Z @ params["cls_w"].T + params["cls_b"]
    logp = log_softmax(logits)
    probs = np.exp(logp)
    loss = None
    if labels is not None:
        C = params["cls_b"].shape[0]
        if np.any(labels >= C) or np.any(labels < 0):
            raise ValueError(f"label out of range for {C} classes")
        loss = float(-np.mean(logp[np.arange(len(labels)), labels]))
    cache = {
        "R": R, "A": A, "enc": enc, "enc_cache": enc_cache, "S": S,
        "alpha": alpha, "beta": beta, "Z": Z, "logits": logits, "probs": probs,
        "labels": labels,
    }
    return loss, cache


def forward(
    record: FeatureRecord,
    params: dict,
    config: FusionConfig,
    label: int | None = None,
) -> ForwardTrace:
    reid, aux = _record_inputs(record, config)
    labels = None if label is None else np.array([label])
    loss, c = forward_batch(reid[None, :], aux[None, :], params, config, labels)
    return ForwardTrace(
        reid=reid,
        aux=aux,
        fused=c["S"][0],
        scores=None if c["alpha"] is None else c["alpha"][0],
        weights=None if c["beta"] is None else c["beta"][0],
        reweighted=None if c["beta"] is None else c["Z"][0],
        logits=c["logits"][0],
        probabilities=c["probs"][0],
        loss=loss,
    )


def backward_batch(cache: dict, params: dict, config: FusionConfig) -> dict:
    """Mean-over-batch cross-entropy gradients for every parameter.

    Attention backward includes the softmax Jacobian and the product-rule
    term through Theta~ = Theta* * beta.
    """
    labels = cache["labels"]
    n = len(labels)
    probs, Z, S = cache["probs"], cache["Z"], cache["S"]
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n

    grads: dict[str, np.ndarray] = {}
    grads["cls_w"] = dlogits.T @ Z
    grads["cls_b"] = dlogits.sum(axis=0)
    dZ = dlogits @ params["cls_w"]

    if config.mode == "attention":
        beta = cache["beta"]
        dS = dZ * beta
        dbeta = dZ * S
        # softmax Jacobian: dalpha_j = beta_j * (dbeta_j - sum_k beta_k dbeta_k)
        dalpha = beta * (dbeta - np.sum(beta * dbeta, axis=1, keepdims=True))
        grads["att_w"] = dalpha.T @ S
        if "att_b" in params:
            grads["att_b"] = dalpha.sum(axis=0)
        dS = dS + dalpha @ params["att_w"]
    else:
        dS = dZ

    reid_dim = cache["enc"].shape[1]
    dEnc = dS[:, :reid_dim]
    if config.encoder_hidden > 0:
        z1, a1 = cache["enc_cache"]
        grads["enc_w2"] = dEnc.T @ a1
        grads["enc_b2"] = dEnc.sum(axis=0)
        da1 = dEnc @ params["enc_w2"]
        dz1 = da1 * (z1 > 0)
        grads["enc_w1"] = dz1.T @ cache["R"]
        grads["enc_b1"] = dz1.sum(axis=0)

    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
    return grads


def backward(
    records: list[FeatureRecord],
    labels: list[int],
    params: dict,
    config: FusionConfig,
) -> tuple[float, dict]:
    """Batch loss and gradients from a list of records."""
    if not records:
        raise ValueError("empty batch")
    R = np.stack([r.blocks["reid"] for r in records])
    A = np.stack([assemble_aux(r, config.aux_selection) for r in records])
    loss, cache = forward_batch(R, A, params, config, np.asarray(labels))
    return loss, backward_batch(cache, params, config)


def embed(record: FeatureRecord, params: dict, config: FusionConfig) -> np.ndarray:
    """Retrieval descriptor: the classifier input (Theta~ or Theta*)."""
    trace = forward(record, params, config)
    return trace.reweighted if config.mode == "attention" else trace.fused


def embed_batch(
    records: list[FeatureRecord], params: dict, config: FusionConfig
) -> np.ndarray:
    R = np.stack([r.blocks["reid"] for r in records])
    A = np.stack([assemble_aux(r, config.aux_selection) for r in records])
    _, cache = forward_batch(R, A, params, config)
    return cache["Z"]


def fused_features(record: FeatureRecord, params: dict, config: FusionConfig) -> np.ndarray:
    """Theta* (post-encoder, pre-attention) — the attribution input."""
    return forward(record, params, config).fused


def logit_and_grad_wrt_fused(
    x: np.ndarray, params: dict, config: FusionConfig, target: int
) -> tuple[float, np.ndarray]:
    """Target logit F(x) and dF/dx at the fused-feature level.

    concat mode: F is linear, gradient is the classifier row.
    attention mode: the gradient carries the softmax Jacobian of the
    attention weights plus the product-rule term.
    """
    w = params["cls_w"][target]
    b = params["cls_b"][target]
    if config.mode == "concat":
        return float(w @ x + b), w.copy()
    alpha = params["att_w"] @ x
    if "att_b" in params:
        alpha = alpha + params["att_b"]
    beta = softmax(alpha)
    z = x * beta
    value = float(w @ z + b)
    wx = w * x
    s = beta * (wx - float(wx @ beta))
    grad = w * beta + params["att_w"].T @ s
    return value, grad


# checkpoint i/o -------------------------------------------------------------

PARAM_ORDER = ["enc_w1", "enc_b1", "enc_w2", "enc_b2", "att_w", "att_b",
               "cls_w", "cls_b"]


def save_checkpoint(path: str, params: dict, config: FusionConfig,
                    meta: dict | None = None) -> None:
    """model.json (config + shapes + offsets) and model.f32 (float32 LE)."""
    os.makedirs(path, exist_ok=True)
    names = [n for n in PARAM_ORDER if n in params]
    tensors = []
    offset = 0
    with open(os.path.join(path, "model.f32"), "wb") as f:
        for name in names:
            arr = params[name]
            tensors.append({"name": name, "shape": list(arr.shape), "offset": offset})
            data = arr.astype("<f4").tobytes()
            f.write(data)
            offset += len(data)
    desc = {
        "config": {
            "mode": config.mode,
            "aux_selection": list(config.aux_selection),
            "encoder_hidden": config.encoder_hidden,
            "attention_bias": config.attention_bias,
        },
        "tensors": tensors,
    }
    if meta:
        desc["meta"] = meta
    with open(os.path.join(path, "model.json"), "w") as f:
        json.dump(desc, f, indent=2, sort_keys=True)


def load_checkpoint(path: str) -> tuple[dict, FusionConfig, dict]:
    with open(os.path.join(path, "model.json")) as f:
        desc = json.load(f)
    cfg = FusionConfig(**desc["config"])
    raw = np.fromfile(os.path.join(path, "model.f32"), dtype="<f4")
    params = {}
    for t in desc["tensors"]:
        size = int(np.prod(t["shape"]))
        start = t["offset"] // 4
        params[t["name"]] = raw[start:start + size].reshape(t["shape"]).astype(np.float64)
    return params, cfg, desc.get("meta", {})
