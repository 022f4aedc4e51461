"""Market-vector generation: concatenation or cross-modal attention fusion.

The attention path projects the numeric vector x and each prior-day article
embedding y_j into a shared width d_model, layer-normalizes both (with
learned gain/bias, applied before fusion), optionally applies inverted
dropout, and runs multi-head scaled dot-product attention with the single
numeric query attending over the text tokens:

    X   = dropout(layer_norm(x W_x))          one query token
    Y_j = dropout(layer_norm(y_j W_y))        n key/value tokens
    per head: Q = X W_Q, K = Y W_K, V = Y W_V
              weights = softmax(Q K^T / sqrt(d_k))
              head    = weights V
    A = [head_1 ; ... ; head_h]
    m = [X ; A] W_f

All forward intermediates are cached so `fusion_backward` can return exact
analytic gradients for every parameter matrix (verified against central
finite differences in the test suite). The batch entry points process many
samples sharing one token count in single numpy calls; the per-sample
functions are thin wrappers over them.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
import math

import numpy as np

from .errors import NumericError

LN_EPS = 1e-5


@dataclass(frozen=True)
class FusionConfig:
    """Geometry and behavior of the fusion block.

    token_source picks what feeds attention keys/values: the individual
    prior-day article embeddings (article_tokens, default) or the pooled
    daily mean as one token (pooled_single, in which case the softmax over
    a single key degenerates to a constant weight of 1).
    """

    d_n: int = 8
    d_t: int = 1
    d_model: int = 64
    h: int = 4
    dropout_p: float = 0.1
    mode: str = "attention"  # attention | concat
    token_source: str = "article_tokens"  # article_tokens | pooled_single
    d_out: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.d_model % self.h != 0:
            raise ValueError(f"d_model={self.d_model} not divisible by h={self.h}")
        if not (0.0 <= self.dropout_p < 1.0):
            raise ValueError(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if self.mode not in ("attention", "concat"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.token_source not in ("article_tokens", "pooled_single"):
            raise ValueError(f"unknown token_source {self.token_source!r}")
        if min(self.d_n, self.d_t, self.d_model, self.h) < 1:
            raise ValueError("dimensions must be >= 1")

    @property
    def d_k(self) -> int:
        return self.d_model // self.h

    @property
    def out_dim(self) -> int:
        return self.d_model if self.d_out is None else self.d_out


@dataclass
class FusionParams:
    """All learned matrices; shapes are fixed by the config.

    W_q/W_k/W_v stack the per-head (d_model, d_k) projections along axis 0.
    """

    W_x: np.ndarray   # (d_n, d_model)
    W_y: np.ndarray   # (d_t, d_model)
    W_q: np.ndarray   # (h, d_model, d_k)
    W_k: np.ndarray   # (h, d_model, d_k)
    W_v: np.ndarray   # (h, d_model, d_k)
    W_f: np.ndarray   # (2*d_model, d_out)
    ln_gain_num: np.ndarray  # (d_model,)
    ln_bias_num: np.ndarray
    ln_gain_txt: np.ndarray
    ln_bias_txt: np.ndarray

    def copy(self) -> "FusionParams":
        return FusionParams(**{f.name: getattr(self, f.name).copy() for f in fields(self)})

    def matrices(self) -> list[tuple[str, np.ndarray]]:
        """Matrices in declared order (the checkpoint serialization order)."""
        return [(f.name, getattr(self, f.name)) for f in fields(self)]


# Gradients share the FusionParams field layout exactly.
FusionGrads = FusionParams


def init_params(cfg: FusionConfig) -> FusionParams:
    """Seeded uniform fan-based init; layer-norm gains 1, biases 0.

    Each weight matrix is drawn uniform in +-sqrt(6 / (fan_in + fan_out)).
    Draw order is fixed (W_x, W_y, then Q/K/V per head, then W_f) so a seed
    pins every entry.
    """
    rng = np.random.default_rng(cfg.seed)
    dm, dk, h = cfg.d_model, cfg.d_k, cfg.h

    def draw(fan_in, fan_out):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=(fan_in, fan_out))

    W_x = draw(cfg.d_n, dm)
    W_y = draw(cfg.d_t, dm)
    W_q = np.empty((h, dm, dk))
    W_k = np.empty((h, dm, dk))
    W_v = np.empty((h, dm, dk))
    for i in range(h):
        W_q[i] = draw(dm, dk)
        W_k[i] = draw(dm, dk)
        W_v[i] = draw(dm, dk)
    W_f = draw(2 * dm, cfg.out_dim)
    return FusionParams(
        W_x=W_x, W_y=W_y, W_q=W_q, W_k=W_k, W_v=W_v, W_f=W_f,
        ln_gain_num=np.ones(dm), ln_bias_num=np.zeros(dm),
        ln_gain_txt=np.ones(dm), ln_bias_txt=np.zeros(dm),
    )


def concat_fuse(x_scaled, y_mean, cfg: FusionConfig | None = None) -> np.ndarray:
    """Market vector by plain concatenation: [x_scaled ; y_mean]."""
    x = np.asarray(x_scaled, dtype=np.float64)
    y = np.asarray(y_mean, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1:
        raise ValueError(f"concat_fuse expects 1-D vectors, got {x.shape} and {y.shape}")
    if cfg is not None and (x.shape[0] != cfg.d_n or y.shape[0] != cfg.d_t):
        raise ValueError(
            f"dimension mismatch: x {x.shape[0]} vs d_n {cfg.d_n}, y {y.shape[0]} vs d_t {cfg.d_t}"
        )
    return np.concatenate([x, y])


def stable_softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Softmax with the row max subtracted first (shift-invariant, no overflow)."""
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def _layer_norm(pre: np.ndarray, gain: np.ndarray, bias: np.ndarray):
    """Normalize over the last axis. Returns (out, v_hat, inv_std) for the cache."""
    mu = pre.mean(axis=-1, keepdims=True)
    var = pre.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + LN_EPS)
    v_hat = (pre - mu) * inv_std
    return gain * v_hat + bias, v_hat, inv_std


def _layer_norm_backward(dout, v_hat, inv_std, gain):
    """Gradients of _layer_norm; reduces the gain/bias grads over leading axes."""
    reduce_axes = tuple(range(dout.ndim - 1))
    dgain = (dout * v_hat).sum(axis=reduce_axes)
    dbias = dout.sum(axis=reduce_axes)
    dv_hat = dout * gain
    dpre = (
        dv_hat
        - dv_hat.mean(axis=-1, keepdims=True)
        - v_hat * (dv_hat * v_hat).mean(axis=-1, keepdims=True)
    ) * inv_std
    return dpre, dgain, dbias


@dataclass
class FusionCache:
    """Forward intermediates retained for the exact backward pass."""

    cfg: FusionConfig
    params: FusionParams
    training: bool
    x: np.ndarray        # (B, d_n)
    tokens: np.ndarray   # (B, n, d_t)
    x_hat: np.ndarray
    x_inv_std: np.ndarray
    mask_x: np.ndarray | None
    Xd: np.ndarray       # (B, d_model) post-LN, post-dropout
    y_hat: np.ndarray
    y_inv_std: np.ndarray
    mask_y: np.ndarray | None
    Yd: np.ndarray       # (B, n, d_model)
    Q: np.ndarray        # (h, B, d_k)
    K: np.ndarray        # (h, B, n, d_k)
    V: np.ndarray        # (h, B, n, d_k)
    weights: np.ndarray  # (h, B, n), softmax rows
    z: np.ndarray        # (B, 2*d_model)

    @property
    def batch_size(self) -> int:
        return self.x.shape[0]


def attention_fuse_batch(
    X,
    tokens,
    params: FusionParams,
    cfg: FusionConfig,
    training: bool = False,
    rng: np.random.Generator | None = None,
    mask_override: tuple[np.ndarray | None, np.ndarray | None] | None = None,
) -> tuple[np.ndarray, FusionCache]:
    """Fuse a batch of samples that share one token count.

    X is (B, d_n); tokens is (B, n, d_t) with n >= 1. When training with
    dropout_p > 0, masks come from `rng` (or a generator seeded from
    cfg.seed when omitted); `mask_override` re-applies previously recorded
    masks so a line search can re-evaluate the same stochastic objective.
    """
    X = np.asarray(X, dtype=np.float64)
    tokens = np.asarray(tokens, dtype=np.float64)
    if X.ndim != 2 or tokens.ndim != 3 or X.shape[0] != tokens.shape[0]:
        raise ValueError(f"bad batch shapes: X {X.shape}, tokens {tokens.shape}")
    if tokens.shape[1] < 1:
        raise ValueError("attention needs at least one token")
    if X.shape[1] != cfg.d_n or tokens.shape[2] != cfg.d_t:
        raise ValueError(
            f"dimension mismatch: x dim {X.shape[1]} vs d_n {cfg.d_n}, "
            f"token dim {tokens.shape[2]} vs d_t {cfg.d_t}"
        )
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(tokens))):
        raise NumericError("non-finite fusion input")

    dm, dk = cfg.d_model, cfg.d_k

    X_ln, x_hat, x_inv_std = _layer_norm(X @ params.W_x, params.ln_gain_num, params.ln_bias_num)
    Y_ln, y_hat, y_inv_std = _layer_norm(tokens @ params.W_y, params.ln_gain_txt, params.ln_bias_txt)

    mask_x = mask_y = None
    if training and cfg.dropout_p > 0.0:
        if mask_override is not None:
            mask_x, mask_y = mask_override
        else:
            if rng is None:
                rng = np.random.default_rng(cfg.seed)
            keep = 1.0 - cfg.dropout_p
            mask_x = (rng.random(X_ln.shape) >= cfg.dropout_p) / keep
            mask_y = (rng.random(Y_ln.shape) >= cfg.dropout_p) / keep
    Xd = X_ln if mask_x is None else X_ln * mask_x
    Yd = Y_ln if mask_y is None else Y_ln * mask_y

    Q = np.einsum("bm,hmk->hbk", Xd, params.W_q)
    K = np.einsum("bnm,hmk->hbnk", Yd, params.W_k)
    V = np.einsum("bnm,hmk->hbnk", Yd, params.W_v)
    logits = np.einsum("hbk,hbnk->hbn", Q, K) / math.sqrt(dk)
    weights = stable_softmax(logits, axis=-1)
    heads = np.einsum("hbn,hbnk->hbk", weights, V)         # (h, B, d_k)
    A = heads.transpose(1, 0, 2).reshape(X.shape[0], dm)   # concat heads
    z = np.concatenate([Xd, A], axis=1)
    M = z @ params.W_f

    cache = FusionCache(
        cfg=cfg, params=params, training=training, x=X, tokens=tokens,
        x_hat=x_hat, x_inv_std=x_inv_std, mask_x=mask_x, Xd=Xd,
        y_hat=y_hat, y_inv_std=y_inv_std, mask_y=mask_y, Yd=Yd,
        Q=Q, K=K, V=V, weights=weights, z=z,
    )
    return M, cache


def fusion_backward_batch(cache: FusionCache, dM) -> tuple[FusionGrads, np.ndarray]:
    """Exact gradients for every parameter matrix plus d(loss)/d(x).

    Parameter gradients are summed over the batch; dX is per sample.
    Requires a cache recorded with training=True (the dropout mask, if any,
    is reused, never redrawn).
    """
    if not cache.training:
        raise ValueError("fusion_backward needs a cache from a training=True forward pass")
    dM = np.asarray(dM, dtype=np.float64)
    B, dm = cache.Xd.shape
    cfg, params = cache.cfg, cache.params
    if dM.shape != (B, cfg.out_dim):
        raise ValueError(f"upstream gradient shape {dM.shape} != {(B, cfg.out_dim)}")
    dk = cfg.d_k

    dW_f = cache.z.T @ dM
    dz = dM @ params.W_f.T
    dXd = dz[:, :dm].copy()
    dheads = dz[:, dm:].reshape(B, cfg.h, dk).transpose(1, 0, 2)  # (h, B, d_k)

    w, V, K, Q = cache.weights, cache.V, cache.K, cache.Q
    dw = np.einsum("hbk,hbnk->hbn", dheads, V)
    dV = np.einsum("hbn,hbk->hbnk", w, dheads)
    dlogits = w * (dw - np.einsum("hbn,hbn->hb", dw, w)[..., None])
    scale = 1.0 / math.sqrt(dk)
    dQ = np.einsum("hbn,hbnk->hbk", dlogits, K) * scale
    dK = np.einsum("hbn,hbk->hbnk", dlogits, Q) * scale

    dW_q = np.einsum("bm,hbk->hmk", cache.Xd, dQ)
    dW_k = np.einsum("bnm,hbnk->hmk", cache.Yd, dK)
    dW_v = np.einsum("bnm,hbnk->hmk", cache.Yd, dV)
    dXd += np.einsum("hbk,hmk->bm", dQ, params.W_q)
    dYd = np.einsum("hbnk,hmk->bnm", dK, params.W_k) + np.einsum("hbnk,hmk->bnm", dV, params.W_v)

    if cache.mask_x is not None:
        dXd = dXd * cache.mask_x
        dYd = dYd * cache.mask_y
    dpre_x, dgain_n, dbias_n = _layer_norm_backward(dXd, cache.x_hat, cache.x_inv_std, params.ln_gain_num)
    dpre_y, dgain_t, dbias_t = _layer_norm_backward(dYd, cache.y_hat, cache.y_inv_std, params.ln_gain_txt)

    dW_x = cache.x.T @ dpre_x
    dW_y = np.einsum("bnt,bnm->tm", cache.tokens, dpre_y)
    dX = dpre_x @ params.W_x.T

    grads = FusionGrads(
        W_x=dW_x, W_y=dW_y, W_q=dW_q, W_k=dW_k, W_v=dW_v, W_f=dW_f,
        ln_gain_num=dgain_n, ln_bias_num=dbias_n,
        ln_gain_txt=dgain_t, ln_bias_txt=dbias_t,
    )
    return grads, dX


def attention_fuse(
    x,
    tokens,
    params: FusionParams,
    cfg: FusionConfig,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, FusionCache]:
    """Fuse a single sample; see attention_fuse_batch for the math."""
    token_list = [np.asarray(t, dtype=np.float64) for t in tokens]
    if len(token_list) == 0:
        raise ValueError("attention needs at least one token")
    M, cache = attention_fuse_batch(
        np.asarray(x, dtype=np.float64)[None, :],
        np.stack(token_list)[None, :, :],
        params, cfg, training=training, rng=rng,
    )
    return M[0], cache


def fusion_backward(cache: FusionCache, dm) -> tuple[FusionGrads, np.ndarray]:
    """Single-sample backward: accepts the 1-D upstream gradient directly."""
    dm = np.asarray(dm, dtype=np.float64)
    if dm.ndim == 1:
        if cache.batch_size != 1:
            raise ValueError("1-D upstream gradient but cache holds a batch")
        grads, dX = fusion_backward_batch(cache, dm[None, :])
        return grads, dX[0]
    grads, dX = fusion_backward_batch(cache, dm)
    return grads, dX
