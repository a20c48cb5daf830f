"""Loss terms, normalization, and the fused objective for training.

All three terms follow one coordinate rule: network inputs are shifted
points, while coefficients, sources, labels, jumps, and normals are
evaluated at the original points.

  supervised   mean |u(X'_i) - g(X_i)|^2                over tau_b
  residual     mean |-gk(X).grad u(X') - k(X) lap u(X') - Q(X)|^2
  interface    mean ( |u(X2) - u(X1) - Phi|^2
                    + |k1 grad u(X1).n1 + k2 grad u(X2).n2 + Psi|^2 )

Phi is the prescribed value jump (plus side minus minus side) and Psi
the prescribed jump of the normal flux along n1; both are zero for
continuity problems, and then the interface term is the plain matching
penalty.

Methods: "std" uses boundary + residual only on the unseparated
domain; "ds" adds the interface term; "nds" additionally divides each
term by the mean squared magnitude of its data (zeta factors), with
zero data leaving the term unnormalized.

The generic term functions accept any evaluand with value /
value_grad / value_grad_lap methods, so the same code path runs on the
network and on catalog exact solutions (the oracle tests).  Training
uses LossEvaluator, which precomputes all coefficient arrays, owns the
kernel workspaces, and assembles the parameter gradient from one
reverse jet pass per point set.
"""

from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from . import kernels, net

__all__ = [
    "LossWeights", "Normalizers", "LossBreakdown", "NetField", "ExactField",
    "compute_normalizers", "supervised_loss", "residual_loss",
    "interface_loss", "total_loss", "loss_and_grad", "LossEvaluator",
]


@dataclass(frozen=True)
class LossWeights:
    w_b: float = 1.0
    w_r: float = 1.0
    w_gamma: float = 1.0

    def __post_init__(self):
        if min(self.w_b, self.w_r, self.w_gamma) < 0:
            raise ValueError("loss weights must be nonnegative")
        if self.w_b == self.w_r == self.w_gamma == 0:
            raise ValueError("at least one loss weight must be positive")


@dataclass(frozen=True)
class Normalizers:
    """Mean squared data magnitudes, computed once per training set and
    then frozen.  A zero value marks data that is identically zero, in
    which case the corresponding term stays unnormalized."""

    zeta_b: float
    zeta_r: float
    zeta_phi: float = 0.0
    zeta_psi: float = 0.0


@dataclass(frozen=True)
class LossBreakdown:
    L_b: float
    L_r: float
    L_gamma: float
    total: float
    normalized: bool


# ---------------------------------------------------------------------------
# evaluands


class NetField:
    """Adapter exposing a trained network as an evaluand."""

    def __init__(self, params):
        self.params = params

    def value(self, xp):
        return net.forward(self.params, xp)

    def value_grad(self, xp):
        v, g, _ = net.forward_jet(self.params, xp, order=1)
        return v, g.T

    def value_grad_lap(self, xp):
        v, g, h = net.forward_jet(self.params, xp, order=2)
        return v, g.T, h.sum(axis=0)


class ExactField:
    """Catalog exact solution viewed through the separation transform:
    inputs are shifted coordinates, mapped back to the owning subdomain
    before the closed forms are applied."""

    def __init__(self, problem):
        self.problem = problem

    # membership must tolerate the one-ulp drift of x - off + off
    # roundtrips, or interface images on closure boundaries fall
    # through; far below any valid separation gap
    _tol = 1e-9

    def _map_back(self, xp):
        xp = np.atleast_2d(np.asarray(xp, float))
        ids = np.full(len(xp), -1, np.int64)
        x = np.empty_like(xp)
        for sub in self.problem.subdomains:
            undecided = ids < 0
            if not undecided.any():
                break
            shifted_back = xp[undecided] - np.asarray(sub.offset)
            mask = geo.outside_distance(sub.shape, shifted_back) <= self._tol
            idx = np.flatnonzero(undecided)[mask]
            ids[idx] = sub.id
            x[idx] = shifted_back[mask]
        if (ids < 0).any():
            bad = xp[ids < 0][0]
            raise ValueError(f"point {tuple(bad)} lies in an invalid region")
        return x, ids

    def _piecewise(self, fns, xp, width=None):
        x, ids = self._map_back(xp)
        out = (np.empty(len(x)) if width is None
               else np.empty((len(x), width)))
        for i, fn in enumerate(fns):
            m = ids == i
            if m.any():
                out[m] = fn(x[m])
        return out

    def value(self, xp):
        return self._piecewise(self.problem.exact, xp)

    def value_grad(self, xp):
        return (self._piecewise(self.problem.exact, xp),
                self._piecewise(self.problem.exact_grad, xp, width=2))

    def value_grad_lap(self, xp):
        return (self._piecewise(self.problem.exact, xp),
                self._piecewise(self.problem.exact_grad, xp, width=2),
                self._piecewise(self.problem.exact_lap, xp))


def _as_evaluand(obj):
    if isinstance(obj, net.NetworkParams):
        return NetField(obj)
    return obj


# ---------------------------------------------------------------------------
# individual terms (reference path, evaluand-generic)


def supervised_loss(evaluand, tset):
    if tset.n_boundary == 0:
        raise ValueError("empty boundary set")
    r = _as_evaluand(evaluand).value(tset.xb_shift) - tset.gb
    return float(np.mean(r * r))


def residual_loss(evaluand, tset, problem):
    if tset.n_interior == 0:
        raise ValueError("empty interior set")
    _, g, lap = _as_evaluand(evaluand).value_grad_lap(tset.xr_shift)
    kap, gkap, q = problem.eval_pde_data(tset.xr)
    r = -np.sum(gkap * g, axis=1) - kap * lap - q
    return float(np.mean(r * r))


def _interface_data(tset, problem):
    """Coefficient and jump arrays at the original interface points."""
    k1 = np.empty(tset.n_interface)
    k2 = np.empty(tset.n_interface)
    phi = np.empty(tset.n_interface)
    psi = np.empty(tset.n_interface)
    for k, ifc in enumerate(problem.interfaces):
        m = tset.xg_iface == k
        if not m.any():
            continue
        x = tset.xg[m]
        k1[m] = problem.kappa[ifc.side_minus](x)
        k2[m] = problem.kappa[ifc.side_plus](x)
        phi[m] = problem.jump_u[k](x)
        psi[m] = problem.jump_flux[k](x)
    return k1, k2, phi, psi


def _interface_terms(evaluand, tset, problem):
    ev = _as_evaluand(evaluand)
    v1, g1 = ev.value_grad(tset.xg1)
    v2, g2 = ev.value_grad(tset.xg2)
    k1, k2, phi, psi = _interface_data(tset, problem)
    p = v2 - v1 - phi
    q = (k1 * np.sum(g1 * tset.ng1, axis=1)
         + k2 * np.sum(g2 * tset.ng2, axis=1) + psi)
    return float(np.mean(p * p)), float(np.mean(q * q))


def interface_loss(evaluand, tset, problem):
    if tset.n_interface == 0:
        raise ValueError("empty interface set")
    value_term, flux_term = _interface_terms(evaluand, tset, problem)
    return value_term + flux_term


def compute_normalizers(tset, problem):
    zeta_b = float(np.mean(tset.gb**2)) if tset.n_boundary else 0.0
    if tset.n_interior:
        _, _, q = problem.eval_pde_data(tset.xr)
        zeta_r = float(np.mean(q**2))
    else:
        zeta_r = 0.0
    if tset.n_interface:
        _, _, phi, psi = _interface_data(tset, problem)
        zeta_phi = float(np.mean(phi**2))
        zeta_psi = float(np.mean(psi**2))
    else:
        zeta_phi = zeta_psi = 0.0
    return Normalizers(zeta_b, zeta_r, zeta_phi, zeta_psi)


def _check_method(method, tset, problem):
    if method not in ("std", "ds", "nds"):
        raise ValueError(f"unknown method {method!r}")
    if method == "std" and tset.n_interface:
        raise ValueError("the baseline method takes no interface records")
    if method in ("ds", "nds") and problem.interfaces and not tset.n_interface:
        raise ValueError(f"method {method} needs interface records")


def _over(value, zeta):
    return value / zeta if zeta > 0.0 else value


def total_loss(method, evaluand, tset, problem, weights=None, normalizers=None):
    """Weighted total for one method; see the module docstring."""
    weights = weights or LossWeights()
    _check_method(method, tset, problem)
    l_b = supervised_loss(evaluand, tset)
    l_r = residual_loss(evaluand, tset, problem)
    if method == "std" or tset.n_interface == 0:
        l_gamma, value_term, flux_term = 0.0, 0.0, 0.0
    else:
        value_term, flux_term = _interface_terms(evaluand, tset, problem)
        l_gamma = value_term + flux_term
    if method == "nds":
        if normalizers is None:
            raise ValueError("nds needs precomputed normalizers")
        z = normalizers
        total = (weights.w_b * _over(l_b, z.zeta_b)
                 + weights.w_r * _over(l_r, z.zeta_r)
                 + weights.w_gamma * (_over(value_term, z.zeta_phi)
                                      + _over(flux_term, z.zeta_psi)))
    else:
        total = weights.w_b * l_b + weights.w_r * l_r
        if method == "ds":
            total += weights.w_gamma * l_gamma
    return LossBreakdown(l_b, l_r, l_gamma, float(total), method == "nds")


# ---------------------------------------------------------------------------
# fused objective for the optimizers


def _first_nonfinite(**named):
    for name, arr in named.items():
        bad = ~np.isfinite(arr)
        if bad.any():
            return f"{name} record {int(np.flatnonzero(bad)[0])}"
    return "unknown"


class LossEvaluator:
    """Callable (theta) -> (loss, flat gradient) for one training run.

    Precomputes every coefficient array, owns one kernel workspace per
    point set, and reduces in a fixed order, so repeated calls allocate
    nothing large and identical theta gives bit-identical results.  The
    evaluation dtype may be float32 while theta stays float64 for the
    optimizers.
    """

    def __init__(self, layer_sizes, method, tset, problem, weights=None,
                 normalizers=None, dtype=np.float64, backend=None):
        weights = weights or LossWeights()
        _check_method(method, tset, problem)
        if method == "nds" and normalizers is None:
            raise ValueError("nds needs precomputed normalizers")
        be = backend if backend is not None else kernels.get_backend()
        self._be = be
        self.layer_sizes = tuple(layer_sizes)
        self.method = method
        self.dtype = np.dtype(dtype)
        dt = self.dtype

        z = normalizers if method == "nds" else Normalizers(0.0, 0.0)
        n_b, n_r, n_g = tset.n_boundary, tset.n_interior, tset.n_interface
        if n_b == 0 or n_r == 0:
            raise ValueError("training set must have boundary and interior points")

        # per-term coefficients folding weight, mean, and normalizer
        self._c_b = weights.w_b / (n_b * (z.zeta_b if z.zeta_b > 0 else 1.0))
        self._c_r = weights.w_r / (n_r * (z.zeta_r if z.zeta_r > 0 else 1.0))

        self._xb = np.ascontiguousarray(tset.xb_shift, dt)
        self._gb = np.ascontiguousarray(tset.gb, dt)
        self._xr = np.ascontiguousarray(tset.xr_shift, dt)
        kap, gkap, q = problem.eval_pde_data(tset.xr)
        self._kr = np.ascontiguousarray(kap, dt)
        self._gkr = np.ascontiguousarray(gkap.T, dt)     # (2, n_r)
        self._qr = np.ascontiguousarray(q, dt)

        self._ws_b = be.JetWorkspace(layer_sizes, n_b, 0, dt)
        self._ws_r = be.JetWorkspace(layer_sizes, n_r, 2, dt)

        self._use_iface = method in ("ds", "nds") and n_g > 0
        if self._use_iface:
            self._c_phi = weights.w_gamma / (n_g * (z.zeta_phi if z.zeta_phi > 0 else 1.0))
            self._c_psi = weights.w_gamma / (n_g * (z.zeta_psi if z.zeta_psi > 0 else 1.0))
            k1, k2, phi, psi = _interface_data(tset, problem)
            self._phi = np.ascontiguousarray(phi, dt)
            self._psi = np.ascontiguousarray(psi, dt)
            # stacked evaluation: first the minus-side images, then plus
            self._xg = np.ascontiguousarray(np.vstack([tset.xg1, tset.xg2]), dt)
            self._kn1 = np.ascontiguousarray((k1[:, None] * tset.ng1).T, dt)
            self._kn2 = np.ascontiguousarray((k2[:, None] * tset.ng2).T, dt)
            self._n_g = n_g
            self._ws_g = be.JetWorkspace(layer_sizes, 2 * n_g, 1, dt)
            self._wv_g = np.empty(2 * n_g, dt)
            self._wg_g = np.empty((2, 2 * n_g), dt)

        _, nparam = kernels.param_layout(layer_sizes)
        self.n_params = nparam
        self._wv_b = np.empty(n_b, dt)
        self._wg_r = np.empty((2, n_r), dt)
        self._wh_r = np.empty((2, n_r), dt)
        self._grad_seg = np.empty(nparam, dt)
        self._grad = np.empty(nparam, np.float64)
        self.n_evals = 0

    def _params(self, theta):
        if theta.dtype != self.dtype:
            theta = theta.astype(self.dtype)
        return net.unflatten(self.layer_sizes, np.ascontiguousarray(theta))

    def __call__(self, theta):
        be = self._be
        p = self._params(np.asarray(theta))
        w, b = p.weights, p.biases
        self.n_evals += 1
        grad = self._grad

        # boundary term
        v, _, _ = be.jet_forward(self._ws_b, w, b, self._xb)
        rb = v - self._gb
        f = self._c_b * float(rb @ rb)
        np.multiply(rb, 2.0 * self._c_b, out=self._wv_b)
        be.jet_backward(self._ws_b, w, b, self._wv_b, None, None,
                        out=self._grad_seg)
        grad[:] = self._grad_seg

        # residual term
        _, g, h = be.jet_forward(self._ws_r, w, b, self._xr)
        rr = -(self._gkr[0] * g[0] + self._gkr[1] * g[1]) \
            - self._kr * (h[0] + h[1]) - self._qr
        f += self._c_r * float(rr @ rr)
        scaled = 2.0 * self._c_r * rr
        np.multiply(self._gkr, -scaled, out=self._wg_r)
        np.multiply(self._kr, -scaled, out=self._wh_r[0])
        self._wh_r[1] = self._wh_r[0]
        be.jet_backward(self._ws_r, w, b, None, self._wg_r, self._wh_r,
                        out=self._grad_seg)
        grad += self._grad_seg

        # interface term on the stacked minus/plus images
        if self._use_iface:
            n_g = self._n_g
            v, g, _ = be.jet_forward(self._ws_g, w, b, self._xg)
            p_jump = v[n_g:] - v[:n_g] - self._phi
            q_flux = (self._kn1[0] * g[0, :n_g] + self._kn1[1] * g[1, :n_g]
                      + self._kn2[0] * g[0, n_g:] + self._kn2[1] * g[1, n_g:]
                      + self._psi)
            f += self._c_phi * float(p_jump @ p_jump)
            f += self._c_psi * float(q_flux @ q_flux)
            pw = 2.0 * self._c_phi * p_jump
            self._wv_g[:n_g] = -pw
            self._wv_g[n_g:] = pw
            qw = 2.0 * self._c_psi * q_flux
            np.multiply(self._kn1, qw, out=self._wg_g[:, :n_g])
            np.multiply(self._kn2, qw, out=self._wg_g[:, n_g:])
            be.jet_backward(self._ws_g, w, b, self._wv_g, self._wg_g, None,
                            out=self._grad_seg)
            grad += self._grad_seg

        if not np.isfinite(f):
            detail = _first_nonfinite(boundary=rb, residual=rr)
            if self._use_iface and detail == "unknown":
                detail = _first_nonfinite(interface_value=p_jump,
                                          interface_flux=q_flux)
            raise FloatingPointError(
                f"non-finite loss during evaluation ({detail})")
        return float(f), grad

    def breakdown(self, theta):
        """Raw per-term losses at theta (for logging; no gradient)."""
        be = self._be
        p = self._params(np.asarray(theta))
        w, b = p.weights, p.biases
        v, _, _ = be.jet_forward(self._ws_b, w, b, self._xb)
        rb = v - self._gb
        l_b = float(rb @ rb) / len(rb)
        _, g, h = be.jet_forward(self._ws_r, w, b, self._xr)
        rr = -(self._gkr[0] * g[0] + self._gkr[1] * g[1]) \
            - self._kr * (h[0] + h[1]) - self._qr
        l_r = float(rr @ rr) / len(rr)
        l_gamma = 0.0
        total = self._c_b * float(rb @ rb) + self._c_r * float(rr @ rr)
        if self._use_iface:
            n_g = self._n_g
            v, g, _ = be.jet_forward(self._ws_g, w, b, self._xg)
            p_jump = v[n_g:] - v[:n_g] - self._phi
            q_flux = (self._kn1[0] * g[0, :n_g] + self._kn1[1] * g[1, :n_g]
                      + self._kn2[0] * g[0, n_g:] + self._kn2[1] * g[1, n_g:]
                      + self._psi)
            l_gamma = (float(p_jump @ p_jump) + float(q_flux @ q_flux)) / n_g
            total += self._c_phi * float(p_jump @ p_jump)
            total += self._c_psi * float(q_flux @ q_flux)
        return LossBreakdown(l_b, l_r, l_gamma, float(total),
                             self.method == "nds")


def loss_and_grad(method, params, tset, problem, weights=None,
                  normalizers=None, backend=None):
    """One-shot total loss and flat parameter gradient."""
    ev = LossEvaluator(params.layer_sizes, method, tset, problem,
                       weights=weights, normalizers=normalizers,
                       dtype=params.dtype, backend=backend)
    theta = net.flatten(params)
    return ev(theta)
