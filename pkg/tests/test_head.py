import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from docrel.core import Mention, PairExample
from docrel.errors import ConfigError, ContractError, ShapeError
from docrel.head import (
    HeadParams,
    head_backward,
    head_forward,
    init_head_params,
    load_checkpoint,
    logsumexp_pool,
    save_checkpoint,
    zero_gradients,
)
from docrel.rng import stream


def pair(head_vecs, tail_vecs, context):
    return PairExample(
        doc_id="d",
        head_id=0,
        tail_id=1,
        head_mentions=tuple(Mention(0, np.asarray(v, float)) for v in head_vecs),
        tail_mentions=tuple(Mention(1, np.asarray(v, float)) for v in tail_vecs),
        context=np.asarray(context, float),
        positive_relations=frozenset(),
    )


def zero_params(d, d1, groups, n_logits, b_o=None):
    return HeadParams(
        W_h=np.zeros((d1, d)),
        W_t=np.zeros((d1, d)),
        W_c1=np.zeros((d1, d)),
        W_c2=np.zeros((d1, d)),
        W_o=np.zeros((n_logits, d1 * d1 // groups)),
        b_o=np.zeros(n_logits) if b_o is None else np.asarray(b_o, float),
        group_count=groups,
    )


class TestLogsumexpPool:
    def test_singleton_is_identity(self):
        v = np.array([0.3, -2.0, 5.0])
        assert np.allclose(logsumexp_pool([v]), v)

    def test_two_identical_mentions_add_ln2(self):
        v = np.array([1.0, -1.0])
        assert np.allclose(logsumexp_pool([v, v]), v + math.log(2))

    def test_frozen_two_mention_value(self):
        # componentwise log(e^0 + e^2)
        out = logsumexp_pool([np.array([0.0]), np.array([2.0])])
        assert abs(out[0] - 2.1269280110429727) < 1e-12

    def test_empty_rejected(self):
        with pytest.raises(ContractError):
            logsumexp_pool([])

    def test_dimension_mismatch_rejected(self):
        with pytest.raises((ShapeError, ValueError)):
            logsumexp_pool([np.zeros(2), np.zeros(3)])

    def test_overflow_safe(self):
        out = logsumexp_pool([np.array([900.0]), np.array([901.0])])
        assert np.isfinite(out).all()

    @given(st.lists(st.lists(st.floats(-50, 50), min_size=3, max_size=3), min_size=1, max_size=6))
    @settings(max_examples=60, deadline=None)
    def test_pool_bounds_and_permutation(self, rows):
        mat = [np.array(r) for r in rows]
        out = logsumexp_pool(mat)
        stacked = np.stack(mat)
        assert np.all(out >= stacked.max(axis=0) - 1e-12)
        perm = list(reversed(mat))
        assert np.allclose(out, logsumexp_pool(perm), rtol=1e-12, atol=1e-12)


class TestForward:
    def test_zero_params_give_bias_logits(self):
        params = zero_params(3, 4, 2, 5, b_o=[1, 2, 3, 4, 5])
        fw = head_forward(pair([[1, 2, 3]], [[0, 1, 0]], [2, 2, 2]), params)
        assert np.array_equal(fw.f, np.array([1.0, 2, 3, 4, 5]))
        assert np.array_equal(fw.x, np.zeros(8))
        assert np.array_equal(fw.x_unit, np.zeros(8))

    def test_single_group_outer_product(self):
        # d=2, d1=2, P=1, identity projections, no context mixing
        params = zero_params(2, 2, 1, 3)
        params.W_h[:, :] = np.eye(2)
        params.W_t[:, :] = np.eye(2)
        a, b, c, e = 0.3, -1.2, 0.8, 0.5
        fw = head_forward(pair([[a, b]], [[c, e]], [0, 0]), params)
        zh, zt = np.tanh([a, b]), np.tanh([c, e])
        expected = np.array(
            [zh[0] * zt[0], zh[0] * zt[1], zh[1] * zt[0], zh[1] * zt[1]]
        )
        assert np.allclose(fw.x, expected, atol=1e-15)
        assert np.allclose(fw.f, 0.0)

    def test_group_per_dimension_is_elementwise(self):
        # P = d1: each group has size 1, so x is the elementwise product
        d, d1 = 3, 4
        rng = stream(0, "t")
        params = HeadParams(
            W_h=rng.normal(size=(d1, d)),
            W_t=rng.normal(size=(d1, d)),
            W_c1=rng.normal(size=(d1, d)),
            W_c2=rng.normal(size=(d1, d)),
            W_o=np.zeros((2, d1)),
            b_o=np.zeros(2),
            group_count=d1,
        )
        ex = pair([rng.normal(size=d)], [rng.normal(size=d)], rng.normal(size=d))
        fw = head_forward(ex, params)
        zh = np.tanh(params.W_h @ ex.head_mentions[0].embedding + params.W_c1 @ ex.context)
        zt = np.tanh(params.W_t @ ex.tail_mentions[0].embedding + params.W_c2 @ ex.context)
        assert fw.x.shape == (d1,)
        assert np.allclose(fw.x, zh * zt, atol=1e-15)

    def test_unit_norm(self):
        params = init_head_params(4, 4, 2, 3, stream(1, "init"))
        fw = head_forward(pair([[1, 0, 0, 1]], [[0, 1, 1, 0]], [1, 1, 0, 0]), params)
        assert abs(np.linalg.norm(fw.x_unit) - 1.0) < 1e-9

    def test_forward_determinism_bitwise(self):
        params = init_head_params(4, 4, 2, 3, stream(1, "init"))
        ex = pair([[1, 0, 0, 1], [2, 1, 0, 0]], [[0, 1, 1, 0]], [1, 1, 0, 0])
        a = head_forward(ex, params)
        b = head_forward(ex, params)
        assert np.array_equal(a.f, b.f) and np.array_equal(a.x, b.x)

    def test_shape_mismatch(self):
        params = zero_params(3, 4, 2, 5)
        with pytest.raises(ShapeError):
            head_forward(pair([[1, 2]], [[1, 2]], [1, 2]), params)


class TestBackward:
    def test_zero_upstream_gives_zero_grads(self):
        params = init_head_params(3, 4, 2, 5, stream(2, "init"))
        fw = head_forward(pair([[1, 0, 2]], [[0, 1, 0]], [1, 1, 1]), params)
        grads, input_grads = head_backward(fw, np.zeros(8), np.zeros(5), params)
        for g in grads.values():
            assert np.all(g == 0.0)
        for g in input_grads.values():
            assert np.all(g == 0.0)

    def test_zero_embedding_routes_zero_normalization_grad(self):
        params = zero_params(2, 2, 1, 3, b_o=[0.5, 0, 0])
        fw = head_forward(pair([[1, 1]], [[1, 1]], [0, 0]), params)
        assert fw.cache["norm"] == 0.0
        grads, _ = head_backward(fw, np.ones(4), np.zeros(3), params)
        # only W_o/b_o touch f; x-side gradient vanished with the zero vector
        assert np.all(grads["W_h"] == 0.0)

    def test_missing_cache_rejected(self):
        params = init_head_params(3, 4, 2, 5, stream(2, "init"))
        fw = head_forward(pair([[1, 0, 2]], [[0, 1, 0]], [1, 1, 1]), params, keep_cache=False)
        with pytest.raises(ContractError):
            head_backward(fw, np.zeros(8), np.zeros(5), params)

    def test_matches_finite_differences(self):
        # spot check; the selftest suite covers many more configurations
        from docrel.selftest import SuiteResult, _check_head

        result = SuiteResult("head")
        _check_head(result, seed=123)
        assert result.passed, result.failures

    def test_accumulation_across_examples(self):
        params = init_head_params(3, 4, 2, 5, stream(3, "init"))
        ex = pair([[1, 0, 2]], [[0, 1, 0]], [1, 1, 1])
        fw = head_forward(ex, params)
        g_x, g_f = np.ones(8), np.ones(5)
        once, _ = head_backward(fw, g_x, g_f, params)
        twice = zero_gradients(params)
        head_backward(fw, g_x, g_f, params, twice)
        head_backward(fw, g_x, g_f, params, twice)
        for name in once:
            assert np.allclose(twice[name], 2 * once[name], rtol=1e-12)


class TestParamsAndCheckpoint:
    def test_group_divisibility_enforced(self):
        with pytest.raises(ConfigError):
            zero_params(3, 5, 2, 4)

    def test_non_finite_rejected(self):
        params = zero_params(2, 2, 1, 3)
        params.W_h[0, 0] = np.nan
        with pytest.raises(ConfigError):
            HeadParams(
                W_h=params.W_h,
                W_t=params.W_t,
                W_c1=params.W_c1,
                W_c2=params.W_c2,
                W_o=params.W_o,
                b_o=params.b_o,
                group_count=1,
            )

    def test_init_bounds_and_determinism(self):
        a = init_head_params(16, 8, 2, 5, stream(7, "init"))
        b = init_head_params(16, 8, 2, 5, stream(7, "init"))
        assert np.array_equal(a.W_h, b.W_h)
        assert np.all(np.abs(a.W_h) <= 1.0 / 4.0)
        assert np.all(a.b_o == 0.0)

    def test_checkpoint_round_trip(self, tmp_path):
        params = init_head_params(4, 4, 2, 6, stream(9, "init"))
        path = tmp_path / "params.ckpt"
        save_checkpoint(params, path)
        loaded = load_checkpoint(path)
        assert loaded.group_count == params.group_count
        for name, arr in params.tensors().items():
            assert np.array_equal(arr, loaded.tensors()[name])
