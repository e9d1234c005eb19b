"""Plaintext reference pipelines and the toy GCN trainer."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .engine import InferenceVariant, VariantKind
from .graph.io import LayerWeights, ModelError, ModelWeights, PlainGraph
from .importance import Thresholds, oracle_masks, soft_masks

SQUARE = (0.0, 0.0, 1.0)


class DataError(ValueError):
    pass


def _as_fraction_array(a) -> np.ndarray:
    a = np.asarray(a)
    flat = [x if isinstance(x, Fraction) else Fraction(float(x)) for x in a.reshape(-1)]
    return np.array(flat, dtype=object).reshape(a.shape)


def poly_apply(coeffs: Sequence, x: np.ndarray) -> np.ndarray:
    """Evaluate ``sum_j c_j x^j`` elementwise (works on float and Fraction arrays)."""
    exact = x.dtype == object
    acc = np.zeros_like(x) if not exact else np.full(x.shape, Fraction(0), dtype=object)
    for c in reversed(list(coeffs)):
        c = (c if isinstance(c, Fraction) else Fraction(float(c))) if exact else float(c)
        acc = acc * x + c
    return acc


def _resolve_activation(act) -> Callable[[np.ndarray], np.ndarray]:
    if act is None:
        return lambda z: z * z
    if callable(act):
        return act
    if act == "relu":
        return lambda z: np.maximum(z, 0)
    if act == "identity":
        return lambda z: z
    return lambda z, c=tuple(act): poly_apply(c, z)


def forward_plain(g: PlainGraph, w: ModelWeights, activation=None) -> np.ndarray:
    """``H <- act(A H W1 + H W2 + b)`` for every layer but the last.

    ``activation`` is one spec (callable, coefficient list, ``"relu"`` or
    ``"identity"``; ``x**2`` by default) or a per-layer list of them.
    """
    w.validate(g.d0)
    acts = activation if isinstance(activation, list) else [activation] * (w.L - 1)
    H = g.features
    A = g.adjacency
    for li, lw in enumerate(w.layers):
        Z = A @ H @ lw.W1 + H @ lw.W2 + lw.b
        H = Z if li == w.L - 1 else _resolve_activation(acts[li])(Z)
    return H


def forward_design_plain(g: PlainGraph, w: ModelWeights, tau: Thresholds | Sequence[float] | None,
                         variant: InferenceVariant, mask_mode: str = "hard", delta=None, sharpen: int = 1,
                         exact: bool = False) -> np.ndarray:
    """Plaintext mirror of the encrypted pipeline in protocol mode.

    ``mask_mode="soft"`` evaluates the comparison polynomial exactly like the
    encrypted path; ``"hard"`` uses step comparisons.  ``exact=True`` computes in
    rational arithmetic and returns an object array of Fractions.
    """
    if mask_mode not in ("hard", "soft"):
        raise ValueError("mask_mode must be 'hard' or 'soft'")
    w.validate(g.d0)
    n = g.n
    conv = _as_fraction_array if exact else (lambda a: np.asarray(a, dtype=np.float64))
    A = conv(g.adjacency)
    X = conv(g.features)
    deg = A.sum(axis=1)

    masks = None
    if variant.kind != VariantKind.BFG:
        tau = tau if isinstance(tau, Thresholds) else Thresholds(tuple(tau))
        if mask_mode == "hard":
            pm = oracle_masks(g.degrees(), tau)
            M0 = conv(pm.M0)
            levels = [conv(x) for x in pm.levels]
        else:
            M0, levels = soft_masks(deg if exact else g.degrees(), tau, delta if delta is not None else n,
                                    sharpen, levels=variant.uses_levels)
            if not exact:
                M0 = M0.astype(np.float64)
                levels = [x.astype(np.float64) for x in levels]
        masks = (M0, levels)

    if variant.prunes:
        keep = 1 - masks[0]
        X = X * keep[:, None]
        A = A * keep[:, None] * keep[None, :]
    if variant.kind == VariantKind.AAO:
        M0, levels = masks
        levels = list(levels)
        levels[-1] = levels[-1] + M0
        masks = (M0, levels)

    H = X
    for li, lw in enumerate(w.layers):
        W1, W2, b = conv(lw.W1), conv(lw.W2), conv(lw.b)
        Z = A.dot(H).dot(W1) + H.dot(W2) + b
        if li == w.L - 1:
            H = Z
        elif variant.uses_levels:
            H = sum(mk[:, None] * poly_apply(p, Z) for mk, p in zip(masks[1], variant.polys.polys))
        else:
            H = poly_apply(variant.uniform, Z)
    return H


def accuracy(logits: np.ndarray, labels: np.ndarray, idx: np.ndarray | None = None) -> float:
    pred = np.argmax(np.asarray(logits, dtype=np.float64), axis=1)
    if idx is not None:
        pred, labels = pred[idx], labels[idx]
    return float(np.mean(pred == labels)) if len(labels) else float("nan")


# ---------------------------------------------------------------------------
# training

@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    epochs: int = 200
    dropout: float = 0.5
    hidden_dim: int = 2
    seed: int = 0
    patience: int = 20
    activation: str = "square"   # or "relu"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.activation not in ("square", "relu"):
            raise ValueError("activation must be 'square' or 'relu'")
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")


def _act(z, kind):
    if kind == "square":
        return z * z, 2 * z
    return np.maximum(z, 0), (z > 0).astype(z.dtype)


def _softmax_xent(logits, labels, idx):
    z = logits[idx]
    z = z - z.max(axis=1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    loss = -np.mean(np.log(p[np.arange(len(idx)), labels[idx]] + 1e-300))
    grad = np.zeros_like(logits)
    p[np.arange(len(idx)), labels[idx]] -= 1
    grad[idx] = p / len(idx)
    return loss, grad


def loss_and_grads(params: dict[str, np.ndarray], A: np.ndarray, X: np.ndarray, labels: np.ndarray,
                   idx: np.ndarray, activation: str = "square", drop_mask: np.ndarray | None = None,
                   weight_decay: float = 0.0):
    """Cross-entropy of the two-layer model and its analytic gradients.

    ``drop_mask`` (already scaled by 1/(1-p)) multiplies the hidden activations.
    """
    W1a, W2a, ba = params["W1_0"], params["W2_0"], params["b_0"]
    W1b, W2b, bb = params["W1_1"], params["W2_1"], params["b_1"]
    AX = A @ X
    Z1 = AX @ W1a + X @ W2a + ba
    H1, dact = _act(Z1, activation)
    Hd = H1 * drop_mask if drop_mask is not None else H1
    AH = A @ Hd
    Z2 = AH @ W1b + Hd @ W2b + bb
    loss, G2 = _softmax_xent(Z2, labels, idx)
    grads = {
        "W1_1": AH.T @ G2,
        "W2_1": Hd.T @ G2,
        "b_1": G2.sum(axis=0),
    }
    GH = A.T @ G2 @ W1b.T + G2 @ W2b.T
    if drop_mask is not None:
        GH = GH * drop_mask
    G1 = GH * dact
    grads["W1_0"] = AX.T @ G1
    grads["W2_0"] = X.T @ G1
    grads["b_0"] = G1.sum(axis=0)
    if weight_decay:
        for k, v in params.items():
            if not k.startswith("b_"):
                loss += 0.5 * weight_decay * float(np.sum(v * v))
                grads[k] = grads[k] + weight_decay * v
    return loss, grads


def _init_params(rng, d0, hidden, classes):
    def glorot(fan_in, fan_out):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-lim, lim, size=(fan_in, fan_out))

    return {
        "W1_0": glorot(d0, hidden), "W2_0": glorot(d0, hidden), "b_0": np.zeros(hidden),
        "W1_1": glorot(hidden, classes), "W2_1": glorot(hidden, classes), "b_1": np.zeros(classes),
    }


def _to_weights(p) -> ModelWeights:
    return ModelWeights([LayerWeights(p["W1_0"], p["W2_0"], p["b_0"]),
                         LayerWeights(p["W1_1"], p["W2_1"], p["b_1"])])


def train_toy(g: PlainGraph, cfg: TrainConfig | None = None) -> ModelWeights:
    """Train the two-layer GCN with Adam, coupled L2 decay and early stopping."""
    cfg = cfg or TrainConfig()
    if g.labels is None:
        raise DataError("training needs node labels")
    train = g.splits.get("train")
    if train is None or len(train) == 0:
        raise DataError("training needs a non-empty 'train' split")
    val = g.splits.get("val")
    if val is None or len(val) == 0:
        val = train
    classes = int(g.labels.max()) + 1
    rng = np.random.default_rng(cfg.seed)
    params = _init_params(rng, g.d0, cfg.hidden_dim, classes)
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v = {k: np.zeros_like(x) for k, x in params.items()}
    A, X = g.adjacency, g.features
    best = (-1.0, {k: x.copy() for k, x in params.items()})
    best_loss = np.inf
    stale = 0
    for epoch in range(1, cfg.epochs + 1):
        keep = 1.0 - cfg.dropout
        drop = (rng.random((g.n, cfg.hidden_dim)) < keep) / keep if cfg.dropout > 0 else None
        _, grads = loss_and_grads(params, A, X, g.labels, train, cfg.activation, drop, cfg.weight_decay)
        for k in params:
            m[k] = cfg.beta1 * m[k] + (1 - cfg.beta1) * grads[k]
            v[k] = cfg.beta2 * v[k] + (1 - cfg.beta2) * grads[k] ** 2
            mh = m[k] / (1 - cfg.beta1**epoch)
            vh = v[k] / (1 - cfg.beta2**epoch)
            params[k] = params[k] - cfg.learning_rate * mh / (np.sqrt(vh) + cfg.eps)
        logits = forward_plain(g, _to_weights(params), "relu" if cfg.activation == "relu" else None)
        acc = accuracy(logits, g.labels, val)
        val_loss, _ = _softmax_xent(logits, g.labels, val)
        # checkpoint on val accuracy; patience also resets while val loss still falls,
        # so an initial accuracy plateau does not end training
        stale += 1
        if acc > best[0]:
            best = (acc, {k: x.copy() for k, x in params.items()})
            stale = 0
        if val_loss < best_loss:
            best_loss = val_loss
            stale = 0
        if stale >= cfg.patience:
            break
    return _to_weights(best[1])


def check_gradients(g: PlainGraph, params: dict[str, np.ndarray] | None = None, activation: str = "square",
                    eps: float = 1e-6, seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients."""
    if g.labels is None:
        raise DataError("gradient check needs labels")
    idx = np.arange(g.n)
    if params is None:
        params = _init_params(np.random.default_rng(seed), g.d0, 2, int(g.labels.max()) + 1)
    _, grads = loss_and_grads(params, g.adjacency, g.features, g.labels, idx, activation, None, 5e-4)
    worst = 0.0
    for k, p in params.items():
        for i in np.ndindex(p.shape):
            old = p[i]
            p[i] = old + eps
            lp, _ = loss_and_grads(params, g.adjacency, g.features, g.labels, idx, activation, None, 5e-4)
            p[i] = old - eps
            lm, _ = loss_and_grads(params, g.adjacency, g.features, g.labels, idx, activation, None, 5e-4)
            p[i] = old
            num = (lp - lm) / (2 * eps)
            denom = max(abs(num), abs(grads[k][i]), 1e-8)
            worst = max(worst, abs(num - grads[k][i]) / denom)
    return worst
