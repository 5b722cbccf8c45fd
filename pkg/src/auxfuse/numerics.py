"""Deterministic numeric kernel: softmax, Adam, finite differences, seeded RNG.

All training math runs in float64. The RNG is numpy's PCG64 generator,
pinned here so every seeded stream in the engine comes from one documented
algorithm.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def seeded_rng(seed: int) -> np.random.Generator:
    """Deterministic generator (uniform, normal, permutation). PCG64 stream."""
    return np.random.Generator(np.random.PCG64(seed))


def softmax(v: np.ndarray) -> np.ndarray:
    """Normalise scores: beta_j = exp(v_j) / sum_r exp(v_r).

    Max-subtraction keeps the exponentials bounded, so inputs like
    [1000, 1000] do not overflow. Raises on empty input.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("softmax of empty vector")
    shifted = v - np.max(v, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def log_softmax(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    shifted = v - np.max(v, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


@dataclass
class Adam:
    """Adam optimiser over a dict of named parameter arrays.

    Defaults follow the standard constants (beta1=0.9, beta2=0.999,
    eps=1e-8); lr defaults to 3e-4, the fusion-model training rate.
    """

    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params: dict, grads: dict) -> None:
        """In-place update. m/v accumulators are lazily zero-initialised."""
        self.t += 1
        for name, p in params.items():
            g = grads[name]
            if g.shape != p.shape:
                raise ValueError(
                    f"shape mismatch for {name}: param {p.shape} vs grad {g.shape}"
                )
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / (1.0 - self.beta1**self.t)
            v_hat = v / (1.0 - self.beta2**self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def finite_diff_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient estimate of a scalar function.

    Test oracle for the hand-derived backward passes; independent of them
    by construction.
    """
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise FloatingPointError(f"non-finite f at coordinate {i}")
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """max_i |a_i - b_i| / max(1e-8, |a_i|, |b_i|), the grad-check metric."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    denom = np.maximum(1e-8, np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0
