"""Logistic-regression head and the deterministic full-batch trainer.

The head is trained standalone on a fixed design matrix (numeric baselines,
concatenation fusion) or jointly with the attention fusion block, in which
case every fusion matrix receives gradients from the same objective:

    L = mean binary cross-entropy + (l2/2) * ||w||^2      (bias unpenalized)

Optimization is plain full-batch gradient descent with a halving backoff:
whenever a step would increase the loss, the learning rate is halved and the
step retried, so the emitted loss trace is monotone non-increasing (exactly
so with dropout off; under each epoch's dropout mask otherwise). Everything
is seeded; two runs with identical inputs produce bitwise-identical
parameters.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NumericError
from .fusion import (
    FusionConfig,
    FusionGrads,
    FusionParams,
    attention_fuse_batch,
    fusion_backward_batch,
    init_params,
)

_MAX_BACKOFF = 64
_LOG_CLAMP = 1e-12


@dataclass
class LRHead:
    w: np.ndarray
    b: float


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    l2_lambda: float = 1e-4
    max_epochs: int = 500
    tolerance: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be >= 0")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")


@dataclass
class TrainResult:
    head: LRHead
    fusion_params: FusionParams | None
    loss_trace: list[float]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def predict_proba(head: LRHead, m) -> np.ndarray | float:
    """P(Up) = sigmoid(w . m + b); accepts one vector or a (N, d) matrix."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape[-1] != head.w.shape[0]:
        raise ValueError(f"market vector dim {m.shape[-1]} != head dim {head.w.shape[0]}")
    p = _sigmoid(m @ head.w + head.b)
    return float(p) if m.ndim == 1 else p


def predict_label(head: LRHead, m) -> np.ndarray | int:
    """Class = Up exactly when p >= 0.5 (the tie at 0.5 predicts Up)."""
    p = predict_proba(head, m)
    if isinstance(p, float):
        return int(p >= 0.5)
    return (p >= 0.5).astype(np.int64)


def _bce_loss(head: LRHead, M: np.ndarray, y: np.ndarray, l2: float) -> float:
    p = _sigmoid(M @ head.w + head.b)
    p = np.clip(p, _LOG_CLAMP, 1.0 - _LOG_CLAMP)
    bce = -np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    return float(bce + 0.5 * l2 * head.w @ head.w)


def loss_and_grad(head: LRHead, batch, l2: float):
    """Loss plus exact gradients: (loss, dL/dw, dL/db, dL/dm per sample)."""
    M, y = batch
    M = np.asarray(M, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if M.ndim != 2 or y.ndim != 1 or M.shape[0] != y.shape[0]:
        raise ValueError(f"bad batch shapes: M {M.shape}, y {y.shape}")
    n = M.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    loss = _bce_loss(head, M, y, l2)
    p = _sigmoid(M @ head.w + head.b)
    g = (p - y) / n
    dw = M.T @ g + l2 * head.w
    db = float(g.sum())
    dM = g[:, None] * head.w[None, :]
    return loss, dw, db, dM


def _check_two_classes(y: np.ndarray):
    if np.unique(y).size < 2:
        raise ValueError("training needs samples of both classes")


def train(
    features,
    labels,
    cfg: TrainConfig,
    fusion_cfg: FusionConfig | None = None,
    fusion_params: FusionParams | None = None,
    tokens: Sequence[np.ndarray] | None = None,
) -> TrainResult:
    """Fit the head (and, when fusion_cfg is given, the fusion block jointly).

    Standalone mode: `features` is the (N, d) design matrix the head sees
    directly. Joint mode: `features` is the (N, d_n) numeric matrix and
    `tokens` holds each sample's (n_i, d_t) prior-day token stack; gradients
    flow through the attention block into every fusion matrix.

    The head starts at zero (loss exactly ln 2 on balanced data); fusion
    parameters start from `fusion_params` or a seeded init. Returns the
    final parameters and the full loss trace; max_epochs=0 returns the
    initial parameters unchanged.
    """
    y = np.asarray(labels, dtype=np.float64)
    _check_two_classes(y)
    if fusion_cfg is None:
        return _train_standalone(np.asarray(features, dtype=np.float64), y, cfg)
    if tokens is None:
        raise ValueError("joint training requires per-sample tokens")
    if fusion_params is None:
        fusion_params = init_params(fusion_cfg)
    return _train_joint(np.asarray(features, dtype=np.float64), tokens, y, cfg, fusion_cfg, fusion_params)


def _train_standalone(M: np.ndarray, y: np.ndarray, cfg: TrainConfig) -> TrainResult:
    head = LRHead(w=np.zeros(M.shape[1]), b=0.0)
    loss, dw, db, _ = loss_and_grad(head, (M, y), cfg.l2_lambda)
    if not np.isfinite(loss):
        raise NumericError("non-finite loss at epoch 0")
    trace = [loss]
    lr = cfg.learning_rate
    for epoch in range(1, cfg.max_epochs + 1):
        accepted = None
        new_loss = np.nan
        for _ in range(_MAX_BACKOFF):
            cand = LRHead(w=head.w - lr * dw, b=head.b - lr * db)
            new_loss = _bce_loss(cand, M, y, cfg.l2_lambda)
            if np.isfinite(new_loss) and new_loss <= trace[-1]:
                accepted = cand
                break
            lr *= 0.5
        if accepted is None:
            if not np.isfinite(new_loss):
                raise NumericError(f"non-finite loss at epoch {epoch}")
            break  # no improving step exists at any rate: converged
        head = accepted
        improvement = trace[-1] - new_loss
        trace.append(new_loss)
        if improvement < cfg.tolerance:
            break
        _, dw, db, _ = loss_and_grad(head, (M, y), cfg.l2_lambda)
    return TrainResult(head=head, fusion_params=None, loss_trace=trace)


def _group_by_token_count(tokens: Sequence[np.ndarray]):
    """Batch samples sharing a token count so each group is one numpy call.

    Group order (ascending count) and the index order inside each group are
    fixed, which pins the floating-point reduction order run to run.
    """
    counts: dict[int, list[int]] = {}
    for i, toks in enumerate(tokens):
        arr = np.asarray(toks, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValueError(f"sample {i}: token stack must be (n>=1, d_t), got {arr.shape}")
        counts.setdefault(arr.shape[0], []).append(i)
    groups = []
    for n in sorted(counts):
        idx = np.asarray(counts[n], dtype=np.intp)
        stack = np.stack([np.asarray(tokens[i], dtype=np.float64) for i in counts[n]])
        groups.append((idx, stack))
    return groups


def _forward_groups(X, groups, params, fcfg, out_dim, training, rng=None, masks=None):
    N = X.shape[0]
    M = np.empty((N, out_dim))
    caches = []
    for gi, (idx, stack) in enumerate(groups):
        override = masks[gi] if masks is not None else None
        Mg, cache = attention_fuse_batch(
            X[idx], stack, params, fcfg, training=training, rng=rng, mask_override=override
        )
        M[idx] = Mg
        caches.append(cache)
    return M, caches


def _step_fusion(params: FusionParams, grads: FusionGrads, lr: float) -> FusionParams:
    return FusionParams(**{name: getattr(params, name) - lr * getattr(grads, name)
                           for name, _ in params.matrices()})


def _accumulate(total: FusionGrads | None, grads: FusionGrads) -> FusionGrads:
    if total is None:
        return grads
    for name, _ in total.matrices():
        getattr(total, name).__iadd__(getattr(grads, name))
    return total


def _train_joint(
    X: np.ndarray,
    tokens: Sequence[np.ndarray],
    y: np.ndarray,
    cfg: TrainConfig,
    fcfg: FusionConfig,
    fparams: FusionParams,
) -> TrainResult:
    if X.shape[0] != len(tokens) or X.shape[0] != y.shape[0]:
        raise ValueError("features, tokens and labels must align")
    groups = _group_by_token_count(tokens)
    out_dim = fcfg.out_dim
    head = LRHead(w=np.zeros(out_dim), b=0.0)
    fparams = fparams.copy()

    M0, _ = _forward_groups(X, groups, fparams, fcfg, out_dim, training=False)
    loss0 = _bce_loss(head, M0, y, cfg.l2_lambda)
    if not np.isfinite(loss0):
        raise NumericError("non-finite loss at epoch 0")
    trace = [loss0]
    lr = cfg.learning_rate

    for epoch in range(1, cfg.max_epochs + 1):
        rng = np.random.default_rng([cfg.seed, epoch]) if fcfg.dropout_p > 0 else None
        M, caches = _forward_groups(X, groups, fparams, fcfg, out_dim, training=True, rng=rng)
        cur_loss, dw, db, dM = loss_and_grad(head, (M, y), cfg.l2_lambda)
        fgrads = None
        for cache, (idx, _) in zip(caches, groups):
            g, _ = fusion_backward_batch(cache, dM[idx])
            fgrads = _accumulate(fgrads, g)
        epoch_masks = [(c.mask_x, c.mask_y) for c in caches]

        accepted = None
        new_loss = np.nan
        for _ in range(_MAX_BACKOFF):
            cand_head = LRHead(w=head.w - lr * dw, b=head.b - lr * db)
            cand_fusion = _step_fusion(fparams, fgrads, lr)
            M2, _ = _forward_groups(
                X, groups, cand_fusion, fcfg, out_dim, training=True, masks=epoch_masks
            )
            new_loss = _bce_loss(cand_head, M2, y, cfg.l2_lambda)
            if np.isfinite(new_loss) and new_loss <= cur_loss:
                accepted = (cand_head, cand_fusion)
                break
            lr *= 0.5
        if accepted is None:
            if not np.isfinite(new_loss):
                raise NumericError(f"non-finite loss at epoch {epoch}")
            break
        head, fparams = accepted
        trace.append(new_loss)
        if cur_loss - new_loss < cfg.tolerance:
            break
    return TrainResult(head=head, fusion_params=fparams, loss_trace=trace)
