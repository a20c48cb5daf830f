"""Built-in problem catalog.

Each problem is a steady diffusion equation -div(kappa grad u) = Q on a
two-dimensional domain split into subdomains with their own smooth
coefficient kappa_i, source Q_i, Dirichlet data g on the outer
boundary, and (optionally) prescribed jumps of u and of the normal flux
across interfaces.  Where an exact solution is known the catalog also
carries its closed-form gradient and Laplacian per subdomain; the loss
oracle tests rely on those.

Conventions: subdomain ids equal their position in the listing, and the
listing order resolves seam membership (see geometry.locate).  The
value jump on an interface is u(plus side) - u(minus side); the flux
jump is kappa grad u . n1 on the plus side minus the same on the minus
side, with n1 the outward normal of the minus-side subdomain.
"""

from dataclasses import dataclass, field

import numpy as np

from .geometry import (Circle, Disk, InterfaceSpec, Rectangle, RectMinusDisk,
                       Segment, SubdomainSpec, locate)

__all__ = ["ProblemSpec", "builtin", "available_problems"]


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    subdomains: list
    interfaces: list
    boundary_pieces: list
    kappa: list          # per subdomain: X (n,2) -> (n,)
    grad_kappa: list     # per subdomain: X -> (n,2)
    source: list         # per subdomain: X -> (n,)
    dirichlet: object    # X on the outer boundary -> (n,)
    jump_u: list = field(default_factory=list)     # per interface: X -> (n,)
    jump_flux: list = field(default_factory=list)  # per interface: X -> (n,)
    exact: list = None
    exact_grad: list = None
    exact_lap: list = None
    d: float = 0.0
    default_d: float = 0.0

    @property
    def has_exact(self):
        return self.exact is not None

    def _piecewise(self, fns, x, width=None):
        x = np.atleast_2d(np.asarray(x, float))
        ids = locate(x, self.subdomains)
        out = (np.empty(len(x)) if width is None
               else np.empty((len(x), width)))
        for i, fn in enumerate(fns):
            m = ids == i
            if m.any():
                out[m] = fn(x[m])
        return out

    def eval_exact(self, x):
        if not self.has_exact:
            raise ValueError(f"problem {self.name} has no exact solution")
        return self._piecewise(self.exact, x)

    def eval_exact_grad(self, x):
        return self._piecewise(self.exact_grad, x, width=2)

    def eval_exact_lap(self, x):
        return self._piecewise(self.exact_lap, x)

    def eval_pde_data(self, x):
        """(kappa, grad kappa, Q) at original-coordinate points."""
        return (self._piecewise(self.kappa, x),
                self._piecewise(self.grad_kappa, x, width=2),
                self._piecewise(self.source, x))


def _const(value):
    return lambda x: np.full(len(x), float(value))


def _zero_vec(x):
    return np.zeros((len(x), 2))


def _square_edges(lo, hi):
    return [
        Segment((lo, lo), (hi, lo)),
        Segment((hi, lo), (hi, hi)),
        Segment((hi, hi), (lo, hi)),
        Segment((lo, hi), (lo, lo)),
    ]


# ---------------------------------------------------------------------------
# two vertical strips, piecewise-constant coefficient 4 | 1


def _make_ex1(d):
    pi = np.pi
    subs = [
        SubdomainSpec(0, Rectangle(0.0, 0.0, 2.0 / 3.0, 1.0), (0.0, 0.0)),
        SubdomainSpec(1, Rectangle(2.0 / 3.0, 0.0, 1.0, 1.0), (d, 0.0)),
    ]
    ifaces = [InterfaceSpec(Segment((2.0 / 3.0, 0.0), (2.0 / 3.0, 1.0)), 0, 1)]

    def u_l(x):
        return np.sin(pi * x[:, 0]) * np.sin(2 * pi * x[:, 1])

    def u_r(x):
        return np.sin(4 * pi * x[:, 0]) * np.sin(2 * pi * x[:, 1])

    def gu_l(x):
        return np.column_stack([
            pi * np.cos(pi * x[:, 0]) * np.sin(2 * pi * x[:, 1]),
            2 * pi * np.sin(pi * x[:, 0]) * np.cos(2 * pi * x[:, 1]),
        ])

    def gu_r(x):
        return np.column_stack([
            4 * pi * np.cos(4 * pi * x[:, 0]) * np.sin(2 * pi * x[:, 1]),
            2 * pi * np.sin(4 * pi * x[:, 0]) * np.cos(2 * pi * x[:, 1]),
        ])

    return ProblemSpec(
        name="ex1",
        subdomains=subs,
        interfaces=ifaces,
        boundary_pieces=_square_edges(0.0, 1.0),
        kappa=[_const(4.0), _const(1.0)],
        grad_kappa=[_zero_vec, _zero_vec],
        source=[lambda x: 20 * pi**2 * u_l(x), lambda x: 20 * pi**2 * u_r(x)],
        dirichlet=lambda x: np.zeros(len(x)),
        jump_u=[_const(0.0)],
        jump_flux=[_const(0.0)],
        exact=[u_l, u_r],
        exact_grad=[gu_l, gu_r],
        exact_lap=[lambda x: -5 * pi**2 * u_l(x),
                   lambda x: -20 * pi**2 * u_r(x)],
        d=d,
        default_d=0.1,
    )


# ---------------------------------------------------------------------------
# four quadrants with coefficients (4, 1, 2, 1) and amplitudes (1, 4, 2, 4)


def _make_ex3(d):
    pi = np.pi
    subs = [
        SubdomainSpec(0, Rectangle(-1.0, -1.0, 0.0, 0.0), (0.0, 0.0)),
        SubdomainSpec(1, Rectangle(0.0, -1.0, 1.0, 0.0), (d, 0.0)),
        SubdomainSpec(2, Rectangle(0.0, 0.0, 1.0, 1.0), (d, d)),
        SubdomainSpec(3, Rectangle(-1.0, 0.0, 0.0, 1.0), (0.0, d)),
    ]
    ifaces = [
        InterfaceSpec(Segment((0.0, -1.0), (0.0, 0.0)), 0, 1),
        InterfaceSpec(Segment((0.0, 0.0), (1.0, 0.0)), 1, 2),
        InterfaceSpec(Segment((0.0, 0.0), (0.0, 1.0)), 2, 3),
        InterfaceSpec(Segment((-1.0, 0.0), (0.0, 0.0)), 0, 3),
    ]
    kap = [4.0, 1.0, 2.0, 1.0]
    amp = [1.0, 4.0, 2.0, 4.0]

    def u_i(c):
        return lambda x: c * np.sin(pi * x[:, 0]) * np.sin(pi * x[:, 1])

    def gu_i(c):
        return lambda x: c * pi * np.column_stack([
            np.cos(pi * x[:, 0]) * np.sin(pi * x[:, 1]),
            np.sin(pi * x[:, 0]) * np.cos(pi * x[:, 1]),
        ])

    def lap_i(c):
        return lambda x: -2 * pi**2 * c * np.sin(pi * x[:, 0]) * np.sin(pi * x[:, 1])

    def q_i(k, c):
        return lambda x: 2 * pi**2 * k * c * np.sin(pi * x[:, 0]) * np.sin(pi * x[:, 1])

    return ProblemSpec(
        name="ex3",
        subdomains=subs,
        interfaces=ifaces,
        boundary_pieces=_square_edges(-1.0, 1.0),
        kappa=[_const(k) for k in kap],
        grad_kappa=[_zero_vec] * 4,
        source=[q_i(k, c) for k, c in zip(kap, amp)],
        dirichlet=lambda x: np.zeros(len(x)),
        jump_u=[_const(0.0)] * 4,
        jump_flux=[_const(0.0)] * 4,
        exact=[u_i(c) for c in amp],
        exact_grad=[gu_i(c) for c in amp],
        exact_lap=[lap_i(c) for c in amp],
        d=d,
        default_d=0.1,
    )


# ---------------------------------------------------------------------------
# disk of one material enclosed by another, coefficients 1 | 4


def _make_ex4(d):
    pi = np.pi
    outer_rect = Rectangle(-2.0, -2.0, 2.0, 2.0)
    hole = Disk(0.0, 0.0, 1.0)
    subs = [
        SubdomainSpec(0, hole, (d, 0.0)),
        SubdomainSpec(1, RectMinusDisk(outer_rect, hole), (0.0, 0.0)),
    ]
    ifaces = [InterfaceSpec(Circle(0.0, 0.0, 1.0), 0, 1)]

    def s2(x):
        return x[:, 0] ** 2 + x[:, 1] ** 2

    def u_in(x):
        return np.sin(pi * (s2(x) - 1.0))

    def u_out(x):
        return np.sin(pi / 4.0 * (s2(x) - 1.0))

    def gu_in(x):
        return 2 * pi * np.cos(pi * (s2(x) - 1.0))[:, None] * x

    def gu_out(x):
        return pi / 2.0 * np.cos(pi / 4.0 * (s2(x) - 1.0))[:, None] * x

    def lap_in(x):
        w = pi * (s2(x) - 1.0)
        return 4 * pi * np.cos(w) - 4 * pi**2 * s2(x) * np.sin(w)

    def lap_out(x):
        w = pi / 4.0 * (s2(x) - 1.0)
        return pi * np.cos(w) - pi**2 / 4.0 * s2(x) * np.sin(w)

    def q_in(x):
        w = pi * (s2(x) - 1.0)
        return -4 * pi * np.cos(w) + 4 * pi**2 * s2(x) * np.sin(w)

    def q_out(x):
        w = pi / 4.0 * (s2(x) - 1.0)
        return -4 * pi * np.cos(w) + pi**2 * s2(x) * np.sin(w)

    return ProblemSpec(
        name="ex4",
        subdomains=subs,
        interfaces=ifaces,
        boundary_pieces=_square_edges(-2.0, 2.0),
        kappa=[_const(1.0), _const(4.0)],
        grad_kappa=[_zero_vec, _zero_vec],
        source=[q_in, q_out],
        dirichlet=u_out,
        jump_u=[_const(0.0)],
        jump_flux=[_const(0.0)],
        exact=[u_in, u_out],
        exact_grad=[gu_in, gu_out],
        exact_lap=[lap_in, lap_out],
        d=d,
        default_d=3.5,
    )


# ---------------------------------------------------------------------------
# disk with variable coefficients and prescribed jumps across r = 1/2


def _make_ex5(d):
    outer_rect = Rectangle(-1.0, -1.0, 1.0, 1.0)
    hole = Disk(0.0, 0.0, 0.5)
    subs = [
        SubdomainSpec(0, hole, (d, 0.0)),
        SubdomainSpec(1, RectMinusDisk(outer_rect, hole), (0.0, 0.0)),
    ]
    ifaces = [InterfaceSpec(Circle(0.0, 0.0, 0.5), 0, 1)]

    def w(x):
        return x[:, 0] + x[:, 1]

    def s2(x):
        return x[:, 0] ** 2 + x[:, 1] ** 2

    def u_in(x):
        return np.sin(w(x))

    def u_out(x):
        return np.log(s2(x))

    def gu_in(x):
        c = np.cos(w(x))
        return np.column_stack([c, c])

    def gu_out(x):
        return 2.0 * x / s2(x)[:, None]

    def phi(x):
        # outer minus inner value on the r = 1/2 circle
        return np.log(0.25) - np.sin(w(x))

    def psi(x):
        # flux jump along the outward normal of the inner disk:
        # outer kappa (grad u_out . n) minus inner kappa (grad u_in . n),
        # on r = 1/2 where grad u_out . n = 4 and grad u_in . n = 2(x+y)cos(x+y)
        ww = w(x)
        return (4.0 * (np.sin(ww) + 2.0)
                - 2.0 * ww * np.cos(ww) * (np.cos(ww) + 2.0))

    return ProblemSpec(
        name="ex5",
        subdomains=subs,
        interfaces=ifaces,
        boundary_pieces=_square_edges(-1.0, 1.0),
        kappa=[lambda x: np.cos(w(x)) + 2.0, lambda x: np.sin(w(x)) + 2.0],
        grad_kappa=[
            lambda x: np.column_stack([-np.sin(w(x)), -np.sin(w(x))]),
            lambda x: np.column_stack([np.cos(w(x)), np.cos(w(x))]),
        ],
        source=[
            lambda x: 4.0 * (np.cos(w(x)) + 1.0) * np.sin(w(x)),
            lambda x: -2.0 * np.cos(w(x)) * w(x) / s2(x),
        ],
        dirichlet=u_out,
        jump_u=[phi],
        jump_flux=[psi],
        exact=[u_in, u_out],
        exact_grad=[gu_in, gu_out],
        exact_lap=[lambda x: -2.0 * np.sin(w(x)),
                   lambda x: np.zeros(len(x))],
        d=d,
        default_d=2.0,
    )


# ---------------------------------------------------------------------------
# one smooth material split by an artificial seam; exists so tests can
# confirm that separating a domain introduces no loss-level error


def _make_smooth_sanity(d):
    pi = np.pi
    subs = [
        SubdomainSpec(0, Rectangle(0.0, 0.0, 0.5, 1.0), (0.0, 0.0)),
        SubdomainSpec(1, Rectangle(0.5, 0.0, 1.0, 1.0), (d, 0.0)),
    ]
    ifaces = [InterfaceSpec(Segment((0.5, 0.0), (0.5, 1.0)), 0, 1)]

    def u(x):
        return np.sin(pi * x[:, 0]) * np.sin(pi * x[:, 1])

    def gu(x):
        return pi * np.column_stack([
            np.cos(pi * x[:, 0]) * np.sin(pi * x[:, 1]),
            np.sin(pi * x[:, 0]) * np.cos(pi * x[:, 1]),
        ])

    return ProblemSpec(
        name="smooth_sanity",
        subdomains=subs,
        interfaces=ifaces,
        boundary_pieces=_square_edges(0.0, 1.0),
        kappa=[_const(1.0)] * 2,
        grad_kappa=[_zero_vec] * 2,
        source=[lambda x: 2 * pi**2 * u(x)] * 2,
        dirichlet=lambda x: np.zeros(len(x)),
        jump_u=[_const(0.0)],
        jump_flux=[_const(0.0)],
        exact=[u, u],
        exact_grad=[gu, gu],
        exact_lap=[lambda x: -2 * pi**2 * u(x)] * 2,
        d=d,
        default_d=0.1,
    )


_REGISTRY = {
    "ex1": _make_ex1,
    "ex3": _make_ex3,
    "ex4": _make_ex4,
    "ex5": _make_ex5,
    "smooth_sanity": _make_smooth_sanity,
}


def available_problems():
    return sorted(_REGISTRY)


def builtin(name, d=None):
    """Problem by name; d overrides the default separation distance.

    Pass d=0 for the unseparated layout used by the baseline method.
    """
    try:
        make = _REGISTRY[name]
    except KeyError:
        raise ValueError(
            f"unknown problem {name!r}, available: {available_problems()}"
        ) from None
    probe = make(0.0)
    return make(float(d) if d is not None else probe.default_d)
