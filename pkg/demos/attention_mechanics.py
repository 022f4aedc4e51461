#!/usr/bin/env python3
"""Tour of the cross-modal attention block on a tiny, printable example.

Walks through: parameter initialization, the forward pass with its
intermediate attention weights, the single-token degeneracy, and an
on-the-spot finite-difference check of the analytic gradients.
"""

import numpy as np

from marketfuse.fusion import (
    FusionConfig,
    attention_fuse,
    fusion_backward,
    init_params,
)

np.set_printoptions(precision=4, suppress=True)


def main():
    cfg = FusionConfig(d_n=4, d_t=6, d_model=8, h=2, dropout_p=0.0, d_out=8, seed=42)
    params = init_params(cfg)
    print(f"config: d_n={cfg.d_n} d_t={cfg.d_t} d_model={cfg.d_model} "
          f"heads={cfg.h} d_k={cfg.d_k} d_out={cfg.out_dim}")
    print(f"W_x {params.W_x.shape}, W_y {params.W_y.shape}, per-head Q/K/V "
          f"{params.W_q.shape[1:]}, W_f {params.W_f.shape}\n")

    rng = np.random.default_rng(0)
    x = rng.normal(size=cfg.d_n)          # one day's scaled numeric features
    tokens = [rng.normal(size=cfg.d_t) for _ in range(3)]  # prior-day articles

    m, cache = attention_fuse(x, tokens, params, cfg)
    print("numeric query x:", x)
    print("market vector m:", m)
    print("\nattention weights (head, token):")
    for i in range(cfg.h):
        print(f"  head {i}: {cache.weights[i, 0]}  (sum={cache.weights[i, 0].sum():.12f})")

    # One token: softmax over a single key is exactly 1, so each head returns
    # that token's V projection untouched.
    _, cache_1 = attention_fuse(x, tokens[:1], params, cfg)
    print("\nsingle-token weights:", cache_1.weights.ravel())

    # Exact gradients: differentiate L = g . m and compare one entry of W_q
    # against a central difference.
    g = rng.normal(size=cfg.out_dim)
    _, cache_t = attention_fuse(x, tokens, params, cfg, training=True)
    grads, dx = fusion_backward(cache_t, g)
    eps = 1e-6
    probe = params.copy()
    probe.W_q[0, 2, 1] += eps
    plus = g @ attention_fuse(x, tokens, probe, cfg)[0]
    probe.W_q[0, 2, 1] -= 2 * eps
    minus = g @ attention_fuse(x, tokens, probe, cfg)[0]
    fd = (plus - minus) / (2 * eps)
    print(f"\nd(loss)/d W_q[0,2,1]: analytic {grads.W_q[0, 2, 1]:+.8f} "
          f"vs finite difference {fd:+.8f}")
    print("d(loss)/dx:", dx)


if __name__ == "__main__":
    main()
