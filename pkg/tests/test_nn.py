import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from t2rec.nn import (
    LayerParams,
    Mlp,
    activations,
    arch_stats,
    backward,
    flatten_grads,
    forward,
    init_mlp,
)
from t2rec.theory.checks import finite_difference_grad, gradient_suite


def layer(w, b):
    return LayerParams(np.array(w, dtype=float), np.array(b, dtype=float))


def test_identity_single_layer_is_linear():
    net = Mlp([layer(np.eye(2), [0, 0])], "relu")
    np.testing.assert_array_equal(forward(net, [1.0, -1.0]), [1.0, -1.0])


def test_two_layer_hand_evaluation():
    net = Mlp([layer(np.eye(2), [0, 0]), layer([[1, 1]], [0])], "relu")
    np.testing.assert_array_equal(forward(net, [1.0, -1.0]), [1.0])


def test_forward_matches_straight_line_composition(rng):
    net = init_mlp([4, 5, 3, 2], "sigmoid", rng)
    x = rng.normal(size=4)
    h = x
    for idx, lp in enumerate(net.layers):
        z = np.array([sum(lp.weights[r, c] * h[c] for c in range(h.size)) + lp.bias[r] for r in range(lp.bias.size)])
        h = z if idx == 2 else np.array([1 / (1 + math.exp(-v)) for v in z])
    np.testing.assert_allclose(forward(net, x), h, rtol=1e-13, atol=1e-14)


def test_forward_rejects_bad_width(rng):
    net = init_mlp([3, 2], rng=rng)
    with pytest.raises(ValueError):
        forward(net, np.ones(4))


def test_layer_invariants():
    with pytest.raises(ValueError):
        LayerParams(np.ones((2, 3)), np.ones(3))
    with pytest.raises(ValueError):
        LayerParams(np.array([[np.nan]]), np.zeros(1))
    with pytest.raises(ValueError):
        Mlp([layer(np.ones((2, 3)), [0, 0]), layer(np.ones((1, 3)), [0])])
    with pytest.raises(ValueError):
        Mlp([])


def test_zero_upstream_gives_zero_gradient(rng):
    net = init_mlp([3, 4, 2], rng=rng)
    grads = backward(net, rng.normal(size=3), np.zeros(2))
    assert all(not g.weights.any() and not g.bias.any() for g in grads)


def test_linear_net_gradient_by_hand(rng):
    net = Mlp([layer(rng.normal(size=(3, 4)), rng.normal(size=3))])
    x = rng.normal(size=4)
    g = backward(net, x, np.array([1.0, 0.0, 0.0]))[0]
    np.testing.assert_array_equal(g.weights[0], x)
    assert g.bias[0] == 1.0
    assert not g.weights[1:].any() and not g.bias[1:].any()


def test_random_three_layer_gradient_matches_finite_differences(rng):
    for kind in ("relu", "sigmoid"):
        net = Mlp([layer(rng.normal(size=(o, i)), rng.normal(size=o)) for i, o in [(4, 5), (5, 3), (3, 2)]], kind)
        x = rng.normal(size=4)
        up = rng.normal(size=2)
        numeric = finite_difference_grad(net, x, up, h=1e-5)
        analytic = flatten_grads(backward(net, x, up))
        np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-8)


def test_gradient_suite_small():
    res = gradient_suite(n_nets=10, seed=3)
    assert res.violations == 0


def test_batched_backward_sums_rows(rng):
    net = init_mlp([3, 4, 2], "sigmoid", rng)
    x = rng.normal(size=(5, 3))
    up = rng.normal(size=(5, 2))
    total = flatten_grads(backward(net, x, up))
    parts = sum(flatten_grads(backward(net, x[i], up[i])) for i in range(5))
    np.testing.assert_allclose(total, parts, rtol=1e-12, atol=1e-14)


def test_arch_stats_examples():
    s = arch_stats(Mlp([layer(np.zeros((2, 2)), [0, 0])]))
    assert (s.depth, s.effective_params, s.param_scale) == (1, 0, 0.0)
    s = arch_stats(Mlp([layer([[2, 0], [0, -3]], [0, 1])]))
    assert (s.effective_params, s.param_scale) == (3, 3.0)


@given(c=st.floats(0.01, 100.0), seed=st.integers(0, 2**16))
def test_arch_stats_scale_equivariance(c, seed):
    net = init_mlp([3, 4, 2], rng=seed)
    net.layers[0].bias[:] = 0.5
    a, b = arch_stats(net), arch_stats(net.scaled(c))
    assert b.effective_params == a.effective_params
    assert b.param_scale == pytest.approx(c * a.param_scale, rel=1e-14)


def test_activation_values():
    np.testing.assert_array_equal(activations("relu", [-2.0, 0.0, 3.0]), [0, 0, 3])
    assert activations("sigmoid", 0.0) == 0.5
    assert activations("sigmoid", math.log(3)) == pytest.approx(0.75, abs=1e-15)
    assert np.all(np.isfinite(activations("sigmoid", [-1e4, 1e4])))


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=20))
def test_relu_idempotent(xs):
    r = activations("relu", xs)
    np.testing.assert_array_equal(activations("relu", r), r)


def test_forward_deterministic(rng):
    net = init_mlp([5, 6, 3], rng=rng)
    x = rng.normal(size=(10, 5))
    assert np.array_equal(forward(net, x), forward(net, x))


@given(seed=st.integers(0, 2**20), act=st.sampled_from(["relu", "sigmoid"]))
def test_serialization_round_trip_is_exact(seed, act):
    rng = np.random.default_rng(seed)
    net = Mlp([layer(rng.normal(size=(o, i)) * 10.0 ** rng.integers(-8, 8), rng.normal(size=o)) for i, o in [(3, 4), (4, 2)]], act)
    doc = json.loads(json.dumps(net.to_dict()))
    back = Mlp.from_dict(doc)
    assert back.activation == act
    for a, b in zip(net.layers, back.layers):
        assert np.array_equal(a.weights, b.weights) and np.array_equal(a.bias, b.bias)


def test_serialization_rejects_unknown_version(rng):
    doc = init_mlp([2, 2], rng=rng).to_dict()
    doc["format_version"] = 99
    with pytest.raises(ValueError):
        Mlp.from_dict(doc)


def test_glorot_init_range(rng):
    net = init_mlp([30, 50], rng=rng)
    limit = math.sqrt(6 / 80)
    assert np.abs(net.layers[0].weights).max() <= limit
    assert not net.layers[0].bias.any()
