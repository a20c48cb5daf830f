"""Parameter handling: init, flat ordering, checkpoints."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dspinn import net


def test_init_shapes_and_determinism():
    sizes = (2, 50, 50, 50, 50, 50, 1)
    p1 = net.init_params(sizes, np.random.default_rng(42))
    p2 = net.init_params(sizes, np.random.default_rng(42))
    p3 = net.init_params(sizes, np.random.default_rng(43))
    assert p1.n_params == 10401
    for w, b, (win, wout) in zip(p1.weights, p1.biases, zip(sizes, sizes[1:])):
        assert w.shape == (wout, win)
        assert np.all(b == 0.0)
    assert all(np.array_equal(a, b) for a, b in zip(p1.weights, p2.weights))
    assert not np.array_equal(p1.weights[0], p3.weights[0])


def test_init_scale_is_glorot():
    rng = np.random.default_rng(0)
    p = net.init_params((200, 300, 1), rng)
    std = p.weights[0].std()
    assert abs(std - np.sqrt(2.0 / 500.0)) < 5e-4


@settings(max_examples=30, deadline=None)
@given(
    hidden=st.lists(st.integers(1, 9), min_size=0, max_size=3),
    d=st.integers(1, 3),
    seed=st.integers(0, 2**20),
)
def test_flatten_unflatten_roundtrip(hidden, d, seed):
    sizes = (d, *hidden, 1)
    p = net.init_params(sizes, np.random.default_rng(seed))
    theta = net.flatten(p)
    assert theta.shape == (p.n_params,)
    q = net.unflatten(sizes, theta)
    for a, b in zip(p.weights + p.biases, q.weights + q.biases):
        np.testing.assert_array_equal(a, b)
    # unflatten views the vector, so edits write through
    theta[0] = 1234.5
    assert q.weights[0].ravel()[0] == 1234.5


def test_flat_ordering_is_layerwise_row_major():
    p = net.init_params((2, 3, 1), np.random.default_rng(1))
    theta = net.flatten(p)
    expect = np.concatenate([
        p.weights[0].ravel(), p.biases[0], p.weights[1].ravel(), p.biases[1],
    ])
    np.testing.assert_array_equal(theta, expect)


def test_unflatten_rejects_wrong_length():
    with pytest.raises(ValueError):
        net.unflatten((2, 3, 1), np.zeros(5))


def test_forward_matches_manual_two_layer():
    p = net.init_params((2, 4, 1), np.random.default_rng(3))
    x = np.random.default_rng(4).normal(size=(6, 2))
    manual = np.tanh(x @ p.weights[0].T + p.biases[0]) @ p.weights[1].T + p.biases[1]
    np.testing.assert_allclose(net.forward(p, x), manual[:, 0], rtol=1e-14)


def test_checkpoint_roundtrip(tmp_path):
    p = net.init_params((2, 8, 8, 1), np.random.default_rng(11))
    cfg = {"problem": "ex1", "method": "nds", "d": 0.1, "seed": 7}
    path = tmp_path / "model.npz"
    net.save_checkpoint(path, p, cfg)
    q, cfg2 = net.load_checkpoint(path)
    assert cfg2 == cfg
    assert q.layer_sizes == p.layer_sizes
    assert q.dtype == p.dtype
    for a, b in zip(p.weights + p.biases, q.weights + q.biases):
        np.testing.assert_array_equal(a, b)


def test_checkpoint_preserves_float32(tmp_path):
    p = net.init_params((2, 4, 1), np.random.default_rng(0), dtype=np.float32)
    path = tmp_path / "m32.npz"
    net.save_checkpoint(path, p, {})
    q, _ = net.load_checkpoint(path)
    assert q.dtype == np.float32


def test_vjp_wrapper_matches_backend_gradient():
    p = net.init_params((2, 6, 1), np.random.default_rng(2))
    x = np.random.default_rng(8).normal(size=(5, 2))
    wv = np.ones(5)
    g = net.vjp_jet(p, x, wv)
    h = 1e-7
    theta = net.flatten(p)
    k = 3
    tp, tm = theta.copy(), theta.copy()
    tp[k] += h
    tm[k] -= h
    fd = (net.forward(net.unflatten(p.layer_sizes, tp), x).sum()
          - net.forward(net.unflatten(p.layer_sizes, tm), x).sum()) / (2 * h)
    assert abs(g[k] - fd) < 1e-6
