"""NumPy reference implementation of the batched jet kernels.

A "jet" carries, for every neuron and every batch point, the value v,
the input gradient g_i = dv/dx_i and the diagonal second derivatives
h_i = d2v/dx_i2.  Both layer types map jets to jets:

  affine  W a + b:   value -> W v + b,   g_i -> W g_i,   h_i -> W h_i
  tanh (elementwise): v -> s(v)
                      g_i -> s'(v) g_i
                      h_i -> s''(v) g_i^2 + s'(v) h_i

The diagonal second-derivative recurrence is exact: no mixed terms ever
feed back into the diagonal, so summing the output h_i gives the true
Laplacian.  One forward pass over a batch therefore yields u, grad u and
lap u everywhere.

The reverse pass accumulates the parameter gradient of

    L(theta) = sum_n ( wv[n] v[n] + sum_i wg[i,n] g[i,n] + wh[i,n] h[i,n] )

for caller-supplied weights, by running the adjoint recurrences of the
rules above.  Through a tanh neuron with preactivation jet (z, gz, hz)
and incoming adjoints (Av, Ag, Ah) the preactivation adjoints are

  Zv = s' Av + s'' sum_i gz_i Ag_i + sum_i (s''' gz_i^2 + s'' hz_i) Ah_i
  Zg_i = s' Ag_i + 2 s'' gz_i Ah_i
  Zh_i = s' Ah_i

with s', s'', s''' evaluated from t = tanh(z):

  s' = 1 - t^2,   s'' = -2 t s',   s''' = s' (6 t^2 - 2).

Storage layout: stacks of shape (Q, n, width) with Q = 1 + order*d,
slab 0 the values, slabs 1..d the gradients, slabs 1+d..2d the second
derivatives.  All buffers live in a JetWorkspace so repeated
evaluations at a fixed batch size allocate nothing large.
"""

import numpy as np

__all__ = ["JetWorkspace", "jet_forward", "jet_backward", "param_layout"]

BACKEND_NAME = "numpy"


def param_layout(layer_sizes):
    """Flat-vector slices for each layer, weights row-major then bias."""
    sizes = [int(s) for s in layer_sizes]
    off = 0
    layout = []
    for w_in, w_out in zip(sizes[:-1], sizes[1:]):
        w_sl = slice(off, off + w_out * w_in)
        off += w_out * w_in
        b_sl = slice(off, off + w_out)
        off += w_out
        layout.append((w_sl, b_sl))
    return layout, off


class JetWorkspace:
    """Preallocated state for jet evaluation at a fixed maximum batch size.

    Args:
        layer_sizes: widths [d, w1, ..., wk, 1]; the output must be scalar.
        capacity: largest batch the workspace accepts.
        order: 0 values only, 1 adds gradients, 2 adds second derivatives.
        dtype: float32 or float64.
    """

    def __init__(self, layer_sizes, capacity, order, dtype=np.float64):
        sizes = tuple(int(s) for s in layer_sizes)
        if len(sizes) < 2:
            raise ValueError("need at least an input and an output layer")
        if sizes[-1] != 1:
            raise ValueError("output layer width must be 1")
        if order not in (0, 1, 2):
            raise ValueError("order must be 0, 1 or 2")
        self.sizes = sizes
        self.d = sizes[0]
        self.order = order
        self.q = 1 + order * self.d
        self.capacity = int(capacity)
        self.dtype = np.dtype(dtype)
        if self.dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
            raise ValueError("dtype must be float32 or float64")

        nl = len(sizes) - 1
        cap, q, dt = self.capacity, self.q, self.dtype
        maxw = max(sizes[1:])
        # preactivation stacks, one per layer (the last doubles as output)
        self.z = [np.empty((q, cap, sizes[l + 1]), dt) for l in range(nl)]
        # tanh values per hidden layer, needed again in the reverse pass
        self.t = [np.empty((cap, sizes[l + 1]), dt) for l in range(nl - 1)]
        # input stack: slab 0 is the batch, gradient slabs are constant
        # basis vectors, second-derivative slabs stay zero
        self.a0 = np.zeros((q, cap, self.d), dt)
        if order >= 1:
            for i in range(self.d):
                self.a0[1 + i, :, i] = 1.0
        # scratch: recomputed activations and the two adjoint buffers
        self.s = np.empty((q, cap, maxw), dt)
        self.adj = (np.empty((q, cap, maxw), dt), np.empty((q, cap, maxw), dt))
        self.sp = np.empty((cap, maxw), dt)
        self.spp = np.empty((cap, maxw), dt)
        self.tmp = np.empty((cap, maxw), dt)
        self.n = 0


def _postact(ws, l, n, out):
    """Write the post-activation stack of hidden layer l into out."""
    wout = ws.sizes[l + 1]
    t = ws.t[l][:n]
    z = ws.z[l]
    sp = ws.sp[:n, :wout]
    np.multiply(t, t, out=sp)
    np.subtract(1.0, sp, out=sp)
    out[0, :n, :wout] = t
    d = ws.d
    if ws.order >= 1:
        for i in range(d):
            np.multiply(sp, z[1 + i, :n], out=out[1 + i, :n, :wout])
    if ws.order == 2:
        spp = ws.spp[:n, :wout]
        np.multiply(t, sp, out=spp)
        spp *= -2.0
        tmp = ws.tmp[:n, :wout]
        for i in range(d):
            g = z[1 + i, :n]
            np.multiply(g, g, out=tmp)
            tmp *= spp
            np.multiply(sp, z[1 + d + i, :n], out=out[1 + d + i, :n, :wout])
            out[1 + d + i, :n, :wout] += tmp
    return out


def jet_forward(ws, weights, biases, x):
    """Evaluate the network jet on a batch.

    Returns (v, g, h): v has shape (n,), g and h shape (d, n); g is None
    below order 1 and h below order 2.  The returned arrays are views
    into workspace storage and are overwritten by the next call.
    """
    x = np.ascontiguousarray(x, dtype=ws.dtype)
    n = x.shape[0]
    if n > ws.capacity:
        raise ValueError(f"batch of {n} exceeds workspace capacity {ws.capacity}")
    if x.shape[1] != ws.d:
        raise ValueError("input dimension mismatch")
    ws.n = n
    nl = len(ws.sizes) - 1
    ws.a0[0, :n] = x
    a, aw = ws.a0, ws.d
    for l in range(nl):
        w = weights[l]
        wout = ws.sizes[l + 1]
        z = ws.z[l]
        for qi in range(ws.q):
            np.matmul(a[qi, :n, :aw], w.T, out=z[qi, :n])
        z[0, :n] += biases[l]
        if l < nl - 1:
            np.tanh(z[0, :n], out=ws.t[l][:n])
            a, aw = _postact(ws, l, n, ws.s), wout
    zo = ws.z[nl - 1]
    v = zo[0, :n, 0]
    g = zo[1:1 + ws.d, :n, 0] if ws.order >= 1 else None
    h = zo[1 + ws.d:, :n, 0] if ws.order == 2 else None
    return v, g, h


def jet_backward(ws, weights, biases, wv, wg, wh, out=None):
    """Accumulate the parameter gradient for the last jet_forward batch.

    The objective differentiated is sum_n (wv v + wg.g + wh.h); pass None
    to drop a term (wg/wh only where the workspace order provides them).
    Writes the flat gradient, layers in order, weights row-major then
    bias, into out (allocated when None).
    """
    n = ws.n
    d = ws.d
    nl = len(ws.sizes) - 1
    layout, nparam = param_layout(ws.sizes)
    if out is None:
        out = np.empty(nparam, ws.dtype)
    ab = ws.adj[0]
    ab[:, :n, :1] = 0.0
    if wv is not None:
        ab[0, :n, 0] = wv
    if wg is not None:
        for i in range(d):
            ab[1 + i, :n, 0] = wg[i]
    if wh is not None:
        for i in range(d):
            ab[1 + d + i, :n, 0] = wh[i]
    flip = 1
    for l in range(nl - 1, -1, -1):
        win, wout = ws.sizes[l], ws.sizes[l + 1]
        if l == 0:
            s_in, siw = ws.a0, d
        else:
            s_in, siw = _postact(ws, l - 1, n, ws.s), win
        w_sl, b_sl = layout[l]
        dw = out[w_sl].reshape(wout, win)
        np.matmul(ab[0, :n, :wout].T, s_in[0, :n, :siw], out=dw)
        for qi in range(1, ws.q):
            dw += ab[qi, :n, :wout].T @ s_in[qi, :n, :siw]
        np.sum(ab[0, :n, :wout], axis=0, out=out[b_sl])
        if l == 0:
            break
        # propagate to the post-activation stack of layer l-1 ...
        w = weights[l]
        post = ws.adj[flip]
        flip = 1 - flip
        for qi in range(ws.q):
            np.matmul(ab[qi, :n, :wout], w, out=post[qi, :n, :win])
        # ... then through the activation, in place.  Slab 0 is rewritten
        # last because the gradient and second-derivative adjoints read it
        # only through tmp, while slabs 1..d must not be clobbered before
        # their contribution to slab 0 is taken.
        t = ws.t[l - 1][:n]
        z = ws.z[l - 1]
        sp = ws.sp[:n, :win]
        np.multiply(t, t, out=sp)
        np.subtract(1.0, sp, out=sp)
        tmp = ws.tmp[:n, :win]
        np.multiply(sp, post[0, :n, :win], out=tmp)
        if ws.order >= 1:
            spp = ws.spp[:n, :win]
            np.multiply(t, sp, out=spp)
            spp *= -2.0
            if ws.order == 2:
                # s''' = s' (6 t^2 - 2)
                sppp = 6.0 * (t * t) - 2.0
                sppp *= sp
            for i in range(d):
                gz = z[1 + i, :n]
                ag = post[1 + i, :n, :win]
                tmp += spp * gz * ag
                if ws.order == 2:
                    hz = z[1 + d + i, :n]
                    ah = post[1 + d + i, :n, :win]
                    tmp += (sppp * gz * gz + spp * hz) * ah
                    ag *= sp
                    ag += 2.0 * spp * gz * ah
                    ah *= sp
                else:
                    ag *= sp
        post[0, :n, :win] = tmp
        ab = post
    return out
