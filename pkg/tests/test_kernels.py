"""Jet kernel checks against independent references.

The forward values are compared with a straightforward loop MLP written
here; gradients and second derivatives are compared against central
finite differences of that reference; the reverse pass is compared
against finite differences of the seeded objective over the full flat
parameter vector.  Every check runs on all built backends.
"""

import numpy as np
import pytest

from dspinn import kernels, net


def ref_value(params, x):
    a = x.T
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = w @ a + b[:, None]
        a = np.tanh(z) if i < len(params.weights) - 1 else z
    return a[0]


def fd_jet(params, x, hg=1e-6, hh=1e-4):
    """Central-difference gradient and second-derivative diagonal."""
    d = x.shape[1]
    g = np.empty((d, len(x)))
    h = np.empty((d, len(x)))
    f0 = ref_value(params, x)
    for i in range(d):
        e = np.zeros(d)
        e[i] = 1.0
        fp, fm = ref_value(params, x + hg * e), ref_value(params, x - hg * e)
        g[i] = (fp - fm) / (2 * hg)
        fp, fm = ref_value(params, x + hh * e), ref_value(params, x - hh * e)
        h[i] = (fp - 2 * f0 + fm) / hh**2
    return g, h


def seeded_objective(theta, layer_sizes, x, wv, wg, wh):
    p = net.unflatten(layer_sizes, theta)
    ws = kernels.get_backend("numpy").JetWorkspace(layer_sizes, len(x), 2)
    v, g, h = kernels.get_backend("numpy").jet_forward(ws, p.weights, p.biases, x)
    total = 0.0
    if wv is not None:
        total += float(wv @ v)
    if wg is not None:
        total += float(np.sum(wg * g))
    if wh is not None:
        total += float(np.sum(wh * h))
    return total


def rel_err(a, b):
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / max(np.linalg.norm(b), 1e-300)


def make_case(sizes, n, seed):
    rng = np.random.default_rng(seed)
    params = net.init_params(sizes, rng)
    x = rng.uniform(-1.5, 1.5, size=(n, sizes[0]))
    return params, x


SIZES = [(2, 8, 8, 1), (2, 5, 1), (3, 16, 1), (1, 7, 7, 1), (2, 50, 50, 50, 50, 50, 1)]


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    return kernels.get_backend(request.param)


@pytest.mark.parametrize("sizes", SIZES)
def test_forward_values_match_reference(backend, sizes):
    params, x = make_case(sizes, 40, seed=hash(sizes) % 2**31)
    ws = backend.JetWorkspace(sizes, len(x), 2)
    v, _, _ = backend.jet_forward(ws, params.weights, params.biases, x)
    assert rel_err(v, ref_value(params, x)) < 1e-13


@pytest.mark.parametrize("sizes", SIZES)
def test_jet_derivatives_match_finite_differences(backend, sizes):
    params, x = make_case(sizes, 25, seed=7 + len(sizes))
    ws = backend.JetWorkspace(sizes, len(x), 2)
    _, g, h = backend.jet_forward(ws, params.weights, params.biases, x)
    g_fd, h_fd = fd_jet(params, x)
    assert rel_err(g, g_fd) < 1e-5
    assert rel_err(h, h_fd) < 1e-5


def test_lower_orders_consistent(backend):
    sizes = (2, 11, 9, 1)
    params, x = make_case(sizes, 17, seed=3)
    ws2 = backend.JetWorkspace(sizes, len(x), 2)
    v2, g2, _ = backend.jet_forward(ws2, params.weights, params.biases, x)
    v2, g2 = v2.copy(), g2.copy()
    ws1 = backend.JetWorkspace(sizes, len(x), 1)
    v1, g1, h1 = backend.jet_forward(ws1, params.weights, params.biases, x)
    ws0 = backend.JetWorkspace(sizes, len(x), 0)
    v0, g0, h0 = backend.jet_forward(ws0, params.weights, params.biases, x)
    assert h1 is None and g0 is None and h0 is None
    np.testing.assert_array_equal(v1, v2)
    np.testing.assert_array_equal(g1, g2)
    np.testing.assert_array_equal(v0, v2)


def test_affine_network_is_exact(backend):
    sizes = (2, 1)
    rng = np.random.default_rng(0)
    params = net.init_params(sizes, rng)
    x = rng.normal(size=(9, 2))
    ws = backend.JetWorkspace(sizes, len(x), 2)
    v, g, h = backend.jet_forward(ws, params.weights, params.biases, x)
    w, b = params.weights[0], params.biases[0]
    np.testing.assert_allclose(v, x @ w[0] + b[0], rtol=1e-15, atol=1e-15)
    np.testing.assert_allclose(g, np.tile(w[0][:, None], (1, 9)), rtol=1e-15)
    np.testing.assert_array_equal(h, np.zeros((2, 9)))


@pytest.mark.parametrize("sizes", [(2, 8, 8, 1), (3, 10, 1), (2, 50, 50, 50, 50, 50, 1)])
@pytest.mark.parametrize("seed_kind", ["v", "vg", "vgh", "h"])
def test_backward_matches_fd_parameter_gradient(backend, sizes, seed_kind):
    params, x = make_case(sizes, 6, seed=11)
    n, d = x.shape
    rng = np.random.default_rng(5)
    wv = rng.normal(size=n) if "v" in seed_kind else None
    wg = rng.normal(size=(d, n)) if "g" in seed_kind else None
    wh = rng.normal(size=(d, n)) if "h" in seed_kind else None

    ws = backend.JetWorkspace(sizes, n, 2)
    backend.jet_forward(ws, params.weights, params.biases, x)
    grad = backend.jet_backward(ws, params.weights, params.biases, wv, wg, wh)

    theta = net.flatten(params)
    fd = np.empty_like(theta)
    h = 1e-6
    for k in range(len(theta)):
        tp, tm = theta.copy(), theta.copy()
        tp[k] += h
        tm[k] -= h
        fd[k] = (seeded_objective(tp, sizes, x, wv, wg, wh)
                 - seeded_objective(tm, sizes, x, wv, wg, wh)) / (2 * h)
    assert rel_err(grad, fd) < 1e-6


def test_workspace_reuse_matches_fresh(backend):
    sizes = (2, 12, 12, 1)
    params, x = make_case(sizes, 30, seed=21)
    ws = backend.JetWorkspace(sizes, 30, 2)
    backend.jet_forward(ws, params.weights, params.biases, x[:9])
    v_small, g_small, _ = backend.jet_forward(ws, params.weights, params.biases, x[:9])
    v_small, g_small = v_small.copy(), g_small.copy()
    backend.jet_forward(ws, params.weights, params.biases, x)
    ws2 = backend.JetWorkspace(sizes, 9, 2)
    v_ref, g_ref, _ = backend.jet_forward(ws2, params.weights, params.biases, x[:9])
    np.testing.assert_array_equal(v_small, v_ref)
    np.testing.assert_array_equal(g_small, g_ref)


def test_repeat_evaluation_bit_identical(backend):
    sizes = (2, 20, 20, 1)
    params, x = make_case(sizes, 50, seed=33)
    ws = backend.JetWorkspace(sizes, 50, 2)
    backend.jet_forward(ws, params.weights, params.biases, x)
    g1 = backend.jet_backward(ws, params.weights, params.biases,
                              np.ones(50), np.ones((2, 50)), np.ones((2, 50)))
    backend.jet_forward(ws, params.weights, params.biases, x)
    g2 = backend.jet_backward(ws, params.weights, params.biases,
                              np.ones(50), np.ones((2, 50)), np.ones((2, 50)))
    np.testing.assert_array_equal(g1, g2)


def test_float32_close_to_float64(backend):
    sizes = (2, 16, 16, 1)
    params, x = make_case(sizes, 20, seed=9)
    p32 = net.NetworkParams(
        sizes,
        [w.astype(np.float32) for w in params.weights],
        [b.astype(np.float32) for b in params.biases],
    )
    ws64 = backend.JetWorkspace(sizes, 20, 2, np.float64)
    ws32 = backend.JetWorkspace(sizes, 20, 2, np.float32)
    v64, g64, h64 = backend.jet_forward(ws64, params.weights, params.biases, x)
    v32, g32, h32 = backend.jet_forward(ws32, p32.weights, p32.biases,
                                        x.astype(np.float32))
    assert v32.dtype == np.float32
    assert rel_err(v32.astype(np.float64), v64) < 1e-5
    assert rel_err(g32.astype(np.float64), g64) < 1e-4
    assert rel_err(h32.astype(np.float64), h64) < 1e-3


def test_capacity_overflow_rejected(backend):
    sizes = (2, 4, 1)
    params, x = make_case(sizes, 10, seed=1)
    ws = backend.JetWorkspace(sizes, 5, 1)
    with pytest.raises(ValueError):
        backend.jet_forward(ws, params.weights, params.biases, x)


def test_backends_agree_pairwise():
    names = kernels.available_backends()
    if len(names) < 2:
        pytest.skip("single backend build")
    sizes = (2, 30, 30, 30, 1)
    params, x = make_case(sizes, 37, seed=12)
    wv = np.linspace(-1.0, 1.0, 37)
    wg = np.linspace(0.5, 2.0, 2 * 37).reshape(2, 37)
    wh = np.linspace(-2.0, -0.5, 2 * 37).reshape(2, 37)
    results = []
    for name in names:
        be = kernels.get_backend(name)
        # capacity above the batch exercises the strided code path
        ws = be.JetWorkspace(sizes, 48, 2)
        v, g, h = be.jet_forward(ws, params.weights, params.biases, x)
        grad = be.jet_backward(ws, params.weights, params.biases, wv, wg, wh)
        results.append((v.copy(), g.copy(), h.copy(), grad.copy()))
    (v0, g0, h0, gr0) = results[0]
    for v, g, h, gr in results[1:]:
        assert rel_err(v, v0) < 1e-13
        assert rel_err(g, g0) < 1e-13
        assert rel_err(h, h0) < 1e-12
        assert rel_err(gr, gr0) < 1e-12


def test_backends_agree_at_full_capacity():
    names = kernels.available_backends()
    if len(names) < 2:
        pytest.skip("single backend build")
    sizes = (2, 25, 25, 1)
    params, x = make_case(sizes, 64, seed=13)
    wv = np.sin(np.arange(64.0))
    results = []
    for name in names:
        be = kernels.get_backend(name)
        # batch == capacity: the compiled backend takes its fused path
        ws = be.JetWorkspace(sizes, 64, 2)
        v, g, h = be.jet_forward(ws, params.weights, params.biases, x)
        grad = be.jet_backward(ws, params.weights, params.biases, wv, None, None)
        results.append((v.copy(), h.copy(), grad.copy()))
    (v0, h0, gr0) = results[0]
    for v, h, gr in results[1:]:
        assert rel_err(v, v0) < 1e-13
        assert rel_err(h, h0) < 1e-12
        assert rel_err(gr, gr0) < 1e-12
