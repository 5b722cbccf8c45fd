"""Trajectory predictor: single-layer LSTM + linear head, trained with MSE.

A trajectory is 20 (x, y) points in [0,1]^2. The model consumes the first 10
points, then rolls out 10 predictions autoregressively (each step is fed the
previous prediction). The trajectory feature is the hidden state after
consuming a full trajectory.

Gate layout in the stacked weight matrices: [input, forget, candidate,
output]. Backpropagation through time is hand-derived, including gradient
flow through the autoregressive feedback.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .numerics import Adam, seeded_rng

OBS_LEN = 10
PRED_LEN = 10
TRAJ_LEN = OBS_LEN + PRED_LEN
INPUT_DIM = 2
HIDDEN = 64


@dataclass
class TrajectorySample:
    id: str
    points: np.ndarray  # (20, 2)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.shape != (TRAJ_LEN, INPUT_DIM):
            raise ValueError(
                f"trajectory {self.id!r}: expected {TRAJ_LEN} (x,y) points, "
                f"got shape {self.points.shape}"
            )
        if not np.all(np.isfinite(self.points)):
            raise ValueError(f"trajectory {self.id!r}: non-finite points")

    @property
    def observed(self) -> np.ndarray:
        return self.points[:OBS_LEN]

    @property
    def target(self) -> np.ndarray:
        return self.points[OBS_LEN:]


def init_model(seed: int, hidden: int = HIDDEN) -> dict[str, np.ndarray]:
    rng = seeded_rng(seed)
    s_in = 1.0 / np.sqrt(INPUT_DIM)
    s_h = 1.0 / np.sqrt(hidden)
    return {
        "w": rng.uniform(-s_in, s_in, size=(4 * hidden, INPUT_DIM)),
        "u": rng.uniform(-s_h, s_h, size=(4 * hidden, hidden)),
        "b": np.zeros(4 * hidden),
        "head_w": rng.uniform(-s_h, s_h, size=(INPUT_DIM, hidden)),
        "head_b": np.zeros(INPUT_DIM),
    }


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _step(x, h, c, model, hidden):
    """One LSTM step over a batch; returns (h, c, cache)."""
    pre = x @ model["w"].T + h @ model["u"].T + model["b"]
    i = _sigmoid(pre[:, :hidden])
    f = _sigmoid(pre[:, hidden:2 * hidden])
    g = np.tanh(pre[:, 2 * hidden:3 * hidden])
    o = _sigmoid(pre[:, 3 * hidden:])
    c_new = f * c + i * g
    tanh_c = np.tanh(c_new)
    h_new = o * tanh_c
    return h_new, c_new, (x, h, c, i, f, g, o, c_new, tanh_c)


def lstm_forward(points: np.ndarray, model: dict):
    """Teacher-forced recurrence over a point sequence (single trajectory).

    Returns (hidden states, cell states), each (T, hidden); h_0 = c_0 = 0.
    """
    pts = np.asarray(points, dtype=np.float64)
    if not np.all(np.isfinite(pts)):
        raise ValueError("non-finite input points")
    hidden = model["b"].shape[0] // 4
    h = np.zeros((1, hidden))
    c = np.zeros((1, hidden))
    hs, cs = [], []
    for t in range(pts.shape[0]):
        h, c, _ = _step(pts[t:t + 1], h, c, model, hidden)
        hs.append(h[0])
        cs.append(c[0])
    return np.array(hs), np.array(cs)


def _rollout(obs: np.ndarray, model: dict, with_cache: bool = False):
    """Batch rollout: consume OBS_LEN observed points, then PRED_LEN
    autoregressive steps. obs is (n, OBS_LEN, 2); returns preds (n, PRED_LEN, 2).
    """
    n = obs.shape[0]
    hidden = model["b"].shape[0] // 4
    h = np.zeros((n, hidden))
    c = np.zeros((n, hidden))
    enc_caches, dec_caches = [], []
    for t in range(OBS_LEN):
        h, c, cache = _step(obs[:, t], h, c, model, hidden)
        enc_caches.append(cache)
    preds = []
    x = obs[:, -1]
    for t in range(PRED_LEN):
        h, c, cache = _step(x, h, c, model, hidden)
        dec_caches.append((cache, h))
        x = h @ model["head_w"].T + model["head_b"]
        preds.append(x)
    P = np.stack(preds, axis=1)
    if with_cache:
        return P, (enc_caches, dec_caches)
    return P


def predict(observed: np.ndarray, model: dict) -> np.ndarray:
    """10 predicted points from 10 observed points (single trajectory)."""
    obs = np.asarray(observed, dtype=np.float64)
    if obs.shape != (OBS_LEN, INPUT_DIM):
        raise ValueError(f"expected ({OBS_LEN}, {INPUT_DIM}) observation")
    if not np.all(np.isfinite(obs)):
        raise ValueError("non-finite input points")
    return _rollout(obs[None], model)[0]


def extract_feature(sample: TrajectorySample, model: dict,
                    full_trajectory: bool = True) -> np.ndarray:
    """Trajectory feature: last hidden state after consuming the trajectory.

    full_trajectory=False restricts the recurrence to the 10 observed points.
    """
    pts = sample.points if full_trajectory else sample.observed
    hs, _ = lstm_forward(pts, model)
    return hs[-1]


def _step_backward(dh, dc, cache, model, grads, hidden):
    """Backward through one LSTM step. Returns (dx, dh_prev, dc_prev)."""
    x, h_prev, c_prev, i, f, g, o, c_new, tanh_c = cache
    do = dh * tanh_c
    dc = dc + dh * o * (1.0 - tanh_c**2)
    di = dc * g
    df = dc * c_prev
    dg = dc * i
    dc_prev = dc * f
    dpre = np.hstack([
        di * i * (1.0 - i),
        df * f * (1.0 - f),
        dg * (1.0 - g**2),
        do * o * (1.0 - o),
    ])
    grads["w"] += dpre.T @ x
    grads["u"] += dpre.T @ h_prev
    grads["b"] += dpre.sum(axis=0)
    dx = dpre @ model["w"]
    dh_prev = dpre @ model["u"]
    return dx, dh_prev, dc_prev


def loss_and_grads(obs: np.ndarray, target: np.ndarray, model: dict):
    """Mean per-coordinate squared error of the rollout, plus gradients.

    obs (n, 10, 2), target (n, 10, 2). Gradient flows through the
    autoregressive feedback: each prediction is also the next step's input.
    """
    n = obs.shape[0]
    hidden = model["b"].shape[0] // 4
    P, (enc_caches, dec_caches) = _rollout(obs, model, with_cache=True)
    diff = P - target
    loss = float(np.mean(diff**2))
    dP = 2.0 * diff / diff.size

    grads = {k: np.zeros_like(v) for k, v in model.items()}
    dh = np.zeros((n, hidden))
    dc = np.zeros((n, hidden))
    dx_next = np.zeros((n, INPUT_DIM))
    for t in reversed(range(PRED_LEN)):
        cache, h_t = dec_caches[t]
        # prediction t: direct loss term plus feedback into step t+1's input
        dpred = dP[:, t] + dx_next
        grads["head_w"] += dpred.T @ h_t
        grads["head_b"] += dpred.sum(axis=0)
        dh = dh + dpred @ model["head_w"]
        dx_next, dh, dc = _step_backward(dh, dc, cache, model, grads, hidden)
    for t in reversed(range(OBS_LEN)):
        # observed inputs are data: their gradients are dropped
        _, dh, dc = _step_backward(dh, dc, enc_caches[t], model, grads, hidden)
    return loss, grads


@dataclass
class TrainResult:
    model: dict
    loss_history: list[float]
    validation_mse: float
    train_ids: list[str] = field(default_factory=list)
    val_ids: list[str] = field(default_factory=list)


def train_trajectory(samples: list[TrajectorySample], seed: int,
                     epochs: int = 50, lr: float = 1e-3, batch_size: int = 16,
                     hidden: int = HIDDEN) -> TrainResult:
    """75/25 train/validation split, Adam on MSE for 50 epochs (defaults)."""
    if len(samples) < 2:
        raise ValueError("need >= 2 trajectory samples")
    rng = seeded_rng(seed)
    perm = rng.permutation(len(samples))
    n_train = max(1, int(round(0.75 * len(samples))))
    if n_train == len(samples):
        n_train = len(samples) - 1
    train = [samples[i] for i in perm[:n_train]]
    val = [samples[i] for i in perm[n_train:]]

    model = init_model(seed, hidden=hidden)
    opt = Adam(lr=lr)
    obs = np.stack([s.observed for s in train])
    tgt = np.stack([s.target for s in train])
    v_obs = np.stack([s.observed for s in val])
    v_tgt = np.stack([s.target for s in val])

    history = []
    for epoch in range(epochs):
        order = seeded_rng(seed ^ (epoch + 1)).permutation(len(train))
        epoch_losses = []
        for start in range(0, len(train), batch_size):
            idx = order[start:start + batch_size]
            loss, grads = loss_and_grads(obs[idx], tgt[idx], model)
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite loss at epoch {epoch}")
            opt.step(model, grads)
            epoch_losses.append(loss)
        history.append(float(np.mean(epoch_losses)))

    val_mse = float(np.mean((_rollout(v_obs, model) - v_tgt) ** 2))
    return TrainResult(
        model=model,
        loss_history=history,
        validation_mse=val_mse,
        train_ids=[s.id for s in train],
        val_ids=[s.id for s in val],
    )


# trajectories.jsonl i/o -----------------------------------------------------

def load_trajectories(path: str) -> list[TrajectorySample]:
    samples = []
    with open(path) as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                samples.append(TrajectorySample(str(obj["id"]), obj["points"]))
            except (KeyError, ValueError) as e:
                raise ValueError(f"{path}:{line_no}: {e}") from e
    return samples


def save_trajectories(samples: list[TrajectorySample], path: str) -> None:
    with open(path, "w") as f:
        for s in samples:
            f.write(json.dumps({"id": s.id, "points": s.points.tolist()}) + "\n")


def export_feature_block(samples: list[TrajectorySample], model: dict,
                         f32_path: str, fragment_path: str | None = None) -> None:
    """trajectory.f32 rows in sample order, plus a manifest fragment."""
    hidden = model["b"].shape[0] // 4
    feats = np.stack([extract_feature(s, model) for s in samples]) if samples \
        else np.zeros((0, hidden))
    feats.astype("<f4").tofile(f32_path)
    if fragment_path:
        frag = {
            "name": "trajectory",
            "dim": hidden,
            "rows": len(samples),
            "sample_ids": [s.id for s in samples],
        }
        with open(fragment_path, "w") as f:
            json.dump(frag, f, indent=2, sort_keys=True)
