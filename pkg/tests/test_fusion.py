import math

import numpy as np
import pytest

from marketfuse.errors import NumericError
from marketfuse.fusion import (
    FusionConfig,
    attention_fuse,
    attention_fuse_batch,
    concat_fuse,
    fusion_backward,
    fusion_backward_batch,
    init_params,
    stable_softmax,
)

# ---------------------------------------------------------------------------
# Independent oracle: the same map written as plain python loops over lists.
# Shares no code with the implementation under test.
# ---------------------------------------------------------------------------


def _matvec(W, v):  # W is (d_in, d_out) as nested lists; returns length d_out
    d_in, d_out = len(W), len(W[0])
    return [sum(W[i][j] * v[i] for i in range(d_in)) for j in range(d_out)]


def _ln(v, gain, bias, eps=1e-5):
    n = len(v)
    mu = sum(v) / n
    var = sum((t - mu) ** 2 for t in v) / n
    return [gain[j] * ((v[j] - mu) / math.sqrt(var + eps)) + bias[j] for j in range(n)]


def naive_attention(x, tokens, params, cfg):
    X = _ln(_matvec(params.W_x.tolist(), list(x)), params.ln_gain_num.tolist(),
            params.ln_bias_num.tolist())
    Ys = [
        _ln(_matvec(params.W_y.tolist(), list(t)), params.ln_gain_txt.tolist(),
            params.ln_bias_txt.tolist())
        for t in tokens
    ]
    A = []
    for i in range(cfg.h):
        Wq = params.W_q[i].tolist()
        Wk = params.W_k[i].tolist()
        Wv = params.W_v[i].tolist()
        Q = _matvec(Wq, X)
        Ks = [_matvec(Wk, Y) for Y in Ys]
        Vs = [_matvec(Wv, Y) for Y in Ys]
        logits = [sum(Q[a] * K[a] for a in range(cfg.d_k)) / math.sqrt(cfg.d_k) for K in Ks]
        top = max(logits)
        exps = [math.exp(v - top) for v in logits]
        total = sum(exps)
        weights = [e / total for e in exps]
        A.extend(sum(weights[n] * Vs[n][a] for n in range(len(Ys))) for a in range(cfg.d_k))
    return _matvec(params.W_f.tolist(), X + A)


def _random_case(rng, d_n=None, d_t=None, h=None, n_tokens=None, d_model=None, dropout=0.0):
    d_n = d_n or int(rng.integers(4, 9))
    d_t = d_t or int(rng.integers(4, 17))
    h = h or int(rng.choice([1, 2, 4]))
    d_model = d_model or h * int(rng.integers(2, 5))
    n_tokens = n_tokens or int(rng.integers(1, 7))
    cfg = FusionConfig(d_n=d_n, d_t=d_t, d_model=d_model, h=h, dropout_p=dropout,
                       d_out=int(rng.integers(2, 7)), seed=int(rng.integers(0, 2**31)))
    params = init_params(cfg)
    x = rng.normal(size=d_n)
    tokens = [rng.normal(size=d_t) for _ in range(n_tokens)]
    return cfg, params, x, tokens


class TestConcatFuse:
    def test_values_copied_in_order(self):
        out = concat_fuse(np.array([1.0, 2.0]), np.array([3.0, 4.0, 5.0]))
        np.testing.assert_array_equal(out, [1.0, 2.0, 3.0, 4.0, 5.0])

    def test_zero_vectors(self):
        out = concat_fuse(np.zeros(8), np.zeros(4))
        np.testing.assert_array_equal(out, np.zeros(12))

    def test_dimension_arithmetic(self):
        assert concat_fuse(np.ones(8), np.ones(384)).shape == (392,)

    def test_config_mismatch(self):
        cfg = FusionConfig(d_n=8, d_t=4, d_model=8, h=2, dropout_p=0.0)
        with pytest.raises(ValueError, match="mismatch"):
            concat_fuse(np.ones(7), np.ones(4), cfg)


class TestInitParams:
    def test_same_seed_bitwise_identical(self):
        cfg = FusionConfig(d_n=4, d_t=6, d_model=8, h=2, dropout_p=0.0, seed=9)
        a, b = init_params(cfg), init_params(cfg)
        for (name, arr_a), (_, arr_b) in zip(a.matrices(), b.matrices()):
            assert arr_a.tobytes() == arr_b.tobytes(), name

    def test_layer_norm_init(self):
        params = init_params(FusionConfig(d_n=4, d_t=6, d_model=8, h=2, dropout_p=0.0))
        np.testing.assert_array_equal(params.ln_gain_num, np.ones(8))
        np.testing.assert_array_equal(params.ln_bias_num, np.zeros(8))
        np.testing.assert_array_equal(params.ln_gain_txt, np.ones(8))
        np.testing.assert_array_equal(params.ln_bias_txt, np.zeros(8))

    def test_different_seeds_differ(self):
        cfg_a = FusionConfig(d_n=4, d_t=6, d_model=8, h=2, dropout_p=0.0, seed=1)
        cfg_b = FusionConfig(d_n=4, d_t=6, d_model=8, h=2, dropout_p=0.0, seed=2)
        assert init_params(cfg_a).W_x.tobytes() != init_params(cfg_b).W_x.tobytes()

    def test_fan_based_bounds(self):
        cfg = FusionConfig(d_n=4, d_t=6, d_model=8, h=2, dropout_p=0.0, seed=3)
        params = init_params(cfg)
        assert np.abs(params.W_x).max() <= math.sqrt(6.0 / (4 + 8))
        assert np.abs(params.W_f).max() <= math.sqrt(6.0 / (16 + cfg.out_dim))

    def test_config_validation(self):
        with pytest.raises(ValueError, match="divisible"):
            FusionConfig(d_n=4, d_t=4, d_model=6, h=4)
        with pytest.raises(ValueError, match="dropout"):
            FusionConfig(d_n=4, d_t=4, d_model=8, h=2, dropout_p=1.0)


class TestAttentionForward:
    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(17)
        cfg, params, x, tokens = _random_case(rng, d_n=4, d_t=6, d_model=4, h=2, n_tokens=3)
        m, _ = attention_fuse(x, tokens, params, cfg)
        np.testing.assert_allclose(m, naive_attention(x, tokens, params, cfg), atol=1e-10)

    def test_single_token_weight_is_exactly_one(self):
        rng = np.random.default_rng(3)
        cfg, params, x, tokens = _random_case(rng, n_tokens=1)
        _, cache = attention_fuse(x, tokens, params, cfg)
        np.testing.assert_array_equal(cache.weights, np.ones_like(cache.weights))

    def test_single_token_output_is_v_projection(self):
        rng = np.random.default_rng(4)
        cfg, params, x, tokens = _random_case(rng, n_tokens=1)
        _, cache = attention_fuse(x, tokens, params, cfg)
        for i in range(cfg.h):
            np.testing.assert_array_equal(
                cache.weights[i, 0] @ cache.V[i, 0], cache.V[i, 0, 0]
            )

    def test_single_token_attention_independent_of_query(self):
        # Replacing x changes m only through the X path; the attention sum is
        # identical because the lone weight is pinned at 1.
        rng = np.random.default_rng(5)
        cfg, params, x, tokens = _random_case(rng, n_tokens=1)
        _, cache_a = attention_fuse(x, tokens, params, cfg)
        _, cache_b = attention_fuse(rng.normal(size=cfg.d_n), tokens, params, cfg)
        a_heads = np.einsum("hbn,hbnk->hbk", cache_a.weights, cache_a.V)
        b_heads = np.einsum("hbn,hbnk->hbk", cache_b.weights, cache_b.V)
        np.testing.assert_array_equal(a_heads, b_heads)

    def test_two_identical_tokens_split_weight_evenly(self):
        rng = np.random.default_rng(6)
        cfg, params, x, _ = _random_case(rng, n_tokens=2)
        token = rng.normal(size=cfg.d_t)
        _, cache = attention_fuse(x, [token, token.copy()], params, cfg)
        np.testing.assert_allclose(cache.weights, 0.5, atol=1e-15)

    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            cfg, params, x, tokens = _random_case(rng)
            _, cache = attention_fuse(x, tokens, params, cfg)
            np.testing.assert_allclose(cache.weights.sum(axis=-1), 1.0, atol=1e-12)

    def test_token_permutation_leaves_output_unchanged(self):
        rng = np.random.default_rng(8)
        cfg, params, x, tokens = _random_case(rng, n_tokens=5)
        m_a, _ = attention_fuse(x, tokens, params, cfg)
        perm = [tokens[i] for i in rng.permutation(len(tokens))]
        m_b, _ = attention_fuse(x, perm, params, cfg)
        np.testing.assert_allclose(m_a, m_b, atol=1e-12)

    def test_softmax_shift_invariance(self):
        rng = np.random.default_rng(9)
        logits = rng.normal(size=(3, 7))
        np.testing.assert_allclose(
            stable_softmax(logits), stable_softmax(logits - 1000.0), atol=1e-12
        )

    def test_training_without_dropout_equals_inference_bitwise(self):
        rng = np.random.default_rng(10)
        cfg, params, x, tokens = _random_case(rng, dropout=0.0)
        m_train, _ = attention_fuse(x, tokens, params, cfg, training=True)
        m_infer, _ = attention_fuse(x, tokens, params, cfg, training=False)
        assert m_train.tobytes() == m_infer.tobytes()

    def test_dropout_masks_recorded_and_deterministic_per_rng(self):
        rng = np.random.default_rng(11)
        cfg, params, x, tokens = _random_case(rng, dropout=0.5)
        m_a, cache = attention_fuse(x, tokens, params, cfg, training=True,
                                    rng=np.random.default_rng(1))
        m_b, _ = attention_fuse(x, tokens, params, cfg, training=True,
                                rng=np.random.default_rng(1))
        assert cache.mask_x is not None
        assert set(np.unique(cache.mask_x)) <= {0.0, 2.0}  # inverted dropout at p=0.5
        assert m_a.tobytes() == m_b.tobytes()

    def test_empty_tokens_rejected(self):
        cfg = FusionConfig(d_n=4, d_t=4, d_model=8, h=2, dropout_p=0.0)
        with pytest.raises(ValueError, match="token"):
            attention_fuse(np.zeros(4), [], init_params(cfg), cfg)

    def test_non_finite_input_rejected(self):
        cfg = FusionConfig(d_n=4, d_t=4, d_model=8, h=2, dropout_p=0.0)
        params = init_params(cfg)
        with pytest.raises(NumericError):
            attention_fuse(np.array([1.0, np.nan, 0.0, 0.0]), [np.zeros(4)], params, cfg)

    def test_batch_equals_per_sample(self):
        rng = np.random.default_rng(12)
        cfg, params, _, _ = _random_case(rng, n_tokens=4)
        X = rng.normal(size=(6, cfg.d_n))
        toks = rng.normal(size=(6, 4, cfg.d_t))
        M, _ = attention_fuse_batch(X, toks, params, cfg)
        for i in range(6):
            m_i, _ = attention_fuse(X[i], list(toks[i]), params, cfg)
            np.testing.assert_allclose(M[i], m_i, atol=1e-12)


def finite_difference_grads(x, tokens, params, cfg, dm, eps=1e-5):
    """Central differences of L = dm . m over every parameter entry and x."""

    def loss_with(p, xv):
        m, _ = attention_fuse(xv, tokens, p, cfg, training=False)
        return float(dm @ m)

    fd = {}
    for name, arr in params.matrices():
        grad = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            plus = loss_with(params, x)
            flat[idx] = orig - eps
            minus = loss_with(params, x)
            flat[idx] = orig
            gflat[idx] = (plus - minus) / (2 * eps)
        fd[name] = grad
    gx = np.zeros_like(x)
    for idx in range(x.size):
        orig = x[idx]
        x[idx] = orig + eps
        plus = loss_with(params, x)
        x[idx] = orig - eps
        minus = loss_with(params, x)
        x[idx] = orig
        gx[idx] = (plus - minus) / (2 * eps)
    fd["x"] = gx
    return fd


def _rel_err(analytic, fd):
    return np.max(np.abs(analytic - fd) / np.maximum(1.0, np.abs(fd)))


class TestFusionBackward:
    def test_zero_upstream_gives_zero_gradients(self):
        rng = np.random.default_rng(13)
        cfg, params, x, tokens = _random_case(rng)
        _, cache = attention_fuse(x, tokens, params, cfg, training=True)
        grads, dx = fusion_backward(cache, np.zeros(cfg.out_dim))
        for name, arr in grads.matrices():
            assert np.all(arr == 0.0), name
        assert np.all(dx == 0.0)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(14)
        for _ in range(3):
            cfg, params, x, tokens = _random_case(rng, d_n=4, d_t=5, h=2, d_model=6, n_tokens=3)
            dm = rng.normal(size=cfg.out_dim)
            m, cache = attention_fuse(x, tokens, params, cfg, training=True)
            grads, dx = fusion_backward(cache, dm)
            fd = finite_difference_grads(x.copy(), tokens, params, cfg, dm)
            for name, arr in grads.matrices():
                assert _rel_err(arr, fd[name]) < 1e-5, name
            assert _rel_err(dx, fd["x"]) < 1e-5

    def test_backward_with_dropout_reuses_recorded_mask(self):
        rng = np.random.default_rng(15)
        cfg, params, x, tokens = _random_case(rng, dropout=0.4, n_tokens=3)
        _, cache = attention_fuse(x, tokens, params, cfg, training=True,
                                  rng=np.random.default_rng(2))
        grads_a, _ = fusion_backward(cache, np.ones(cfg.out_dim))
        grads_b, _ = fusion_backward(cache, np.ones(cfg.out_dim))
        for (name, a), (_, b) in zip(grads_a.matrices(), grads_b.matrices()):
            assert a.tobytes() == b.tobytes(), name

    def test_inference_cache_rejected(self):
        rng = np.random.default_rng(16)
        cfg, params, x, tokens = _random_case(rng)
        _, cache = attention_fuse(x, tokens, params, cfg, training=False)
        with pytest.raises(ValueError, match="training"):
            fusion_backward(cache, np.zeros(cfg.out_dim))

    def test_batch_backward_equals_sum_of_per_sample(self):
        rng = np.random.default_rng(18)
        cfg, params, _, _ = _random_case(rng, n_tokens=3)
        X = rng.normal(size=(5, cfg.d_n))
        toks = rng.normal(size=(5, 3, cfg.d_t))
        dM = rng.normal(size=(5, cfg.out_dim))
        _, cache = attention_fuse_batch(X, toks, params, cfg, training=True)
        batch_grads, batch_dX = fusion_backward_batch(cache, dM)
        total = {name: np.zeros_like(arr) for name, arr in batch_grads.matrices()}
        for i in range(5):
            _, c_i = attention_fuse(X[i], list(toks[i]), params, cfg, training=True)
            g_i, dx_i = fusion_backward(c_i, dM[i])
            for name, arr in g_i.matrices():
                total[name] += arr
            np.testing.assert_allclose(batch_dX[i], dx_i, atol=1e-12)
        for name, arr in batch_grads.matrices():
            np.testing.assert_allclose(arr, total[name], atol=1e-10), name
