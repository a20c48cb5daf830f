"""Shapes, the subdomain separation transform, and training-set sampling.

Points live in original coordinates; each subdomain carries a rigid
translation ("offset") applied before the network sees a point.  A
training set stores both coordinates for every record so the loss can
evaluate coefficients at X and the network at X' = X + offset.
Interface records hold one original curve point together with its two
shifted images and the outward unit normals of both adjacent
subdomains, evaluated in original coordinates where n1 = -n2.
"""

from dataclasses import dataclass

import numpy as np

# ---------------------------------------------------------------------------
# shapes


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned closed rectangle [xlo, xhi] x [ylo, yhi]."""

    xlo: float
    ylo: float
    xhi: float
    yhi: float

    def __post_init__(self):
        if not (self.xhi > self.xlo and self.yhi > self.ylo):
            raise ValueError("degenerate rectangle")

    def contains(self, pts):
        x, y = pts[:, 0], pts[:, 1]
        return ((x >= self.xlo) & (x <= self.xhi)
                & (y >= self.ylo) & (y <= self.yhi))

    closure_contains = contains

    def sample(self, n, rng):
        return np.column_stack([
            rng.uniform(self.xlo, self.xhi, n),
            rng.uniform(self.ylo, self.yhi, n),
        ])

    @property
    def bbox(self):
        return (self.xlo, self.ylo, self.xhi, self.yhi)


@dataclass(frozen=True)
class Disk:
    """Open disk (x-cx)^2 + (y-cy)^2 < r^2."""

    cx: float
    cy: float
    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("disk radius must be positive")

    def _dist2(self, pts):
        return (pts[:, 0] - self.cx) ** 2 + (pts[:, 1] - self.cy) ** 2

    def contains(self, pts):
        return self._dist2(pts) < self.r**2

    def closure_contains(self, pts):
        return self._dist2(pts) <= self.r**2

    def sample(self, n, rng):
        # rejection from the bounding square keeps the draw order (and so
        # the result) a pure function of the rng state
        out = np.empty((n, 2))
        have = 0
        while have < n:
            cand = np.column_stack([
                rng.uniform(self.cx - self.r, self.cx + self.r, n),
                rng.uniform(self.cy - self.r, self.cy + self.r, n),
            ])
            cand = cand[self.contains(cand)]
            take = min(n - have, len(cand))
            out[have:have + take] = cand[:take]
            have += take
        return out

    @property
    def bbox(self):
        return (self.cx - self.r, self.cy - self.r,
                self.cx + self.r, self.cy + self.r)


@dataclass(frozen=True)
class RectMinusDisk:
    """Closed rectangle with an open disk removed (the hole's boundary
    circle belongs to this shape, not to the hole)."""

    rect: Rectangle
    hole: Disk

    def contains(self, pts):
        return self.rect.contains(pts) & ~self.hole.contains(pts)

    closure_contains = contains

    def sample(self, n, rng):
        out = np.empty((n, 2))
        have = 0
        while have < n:
            cand = self.rect.sample(n, rng)
            cand = cand[~self.hole.contains(cand)]
            take = min(n - have, len(cand))
            out[have:have + take] = cand[:take]
            have += take
        return out

    @property
    def bbox(self):
        return self.rect.bbox


@dataclass(frozen=True)
class SubdomainSpec:
    id: int
    shape: object
    offset: tuple


# ---------------------------------------------------------------------------
# interface curves


@dataclass(frozen=True)
class Segment:
    """Straight interface piece from p0 to p1."""

    p0: tuple
    p1: tuple

    def sample(self, n, rng):
        t = rng.random(n)
        p0 = np.asarray(self.p0)
        p1 = np.asarray(self.p1)
        return p0 + t[:, None] * (p1 - p0)

    def unit_normals(self, pts):
        tang = np.subtract(self.p1, self.p0)
        tang = tang / np.linalg.norm(tang)
        perp = np.array([-tang[1], tang[0]])
        return np.broadcast_to(perp, (len(pts), 2)).copy()

    def distance(self, pts):
        p0 = np.asarray(self.p0)
        seg = np.subtract(self.p1, self.p0)
        t = np.clip((pts - p0) @ seg / (seg @ seg), 0.0, 1.0)
        proj = p0 + t[:, None] * seg
        return np.linalg.norm(pts - proj, axis=1)

    def midpoint(self):
        return 0.5 * (np.asarray(self.p0) + np.asarray(self.p1))


@dataclass(frozen=True)
class Circle:
    """Full circle of radius r around (cx, cy)."""

    cx: float
    cy: float
    r: float

    def sample(self, n, rng):
        ang = rng.uniform(0.0, 2.0 * np.pi, n)
        return np.column_stack([self.cx + self.r * np.cos(ang),
                                self.cy + self.r * np.sin(ang)])

    def unit_normals(self, pts):
        v = pts - np.array([self.cx, self.cy])
        return v / np.linalg.norm(v, axis=1, keepdims=True)

    def distance(self, pts):
        v = pts - np.array([self.cx, self.cy])
        return np.abs(np.linalg.norm(v, axis=1) - self.r)

    def midpoint(self):
        return np.array([self.cx + self.r, self.cy])


@dataclass(frozen=True)
class InterfaceSpec:
    curve: object
    side_minus: int  # subdomain id owning n1
    side_plus: int   # subdomain id owning n2


# ---------------------------------------------------------------------------
# transform and lookup


def shift(x, sub):
    """Translate one original-coordinate point by its subdomain offset."""
    pt = np.asarray(x, float).reshape(1, 2)
    if not sub.shape.closure_contains(pt)[0]:
        raise ValueError(f"point {tuple(pt[0])} not in subdomain {sub.id}")
    return pt[0] + np.asarray(sub.offset)


def shift_points(pts, sub):
    return pts + np.asarray(sub.offset)


def map_back(xp, subdomains):
    """Invert shift: find the shifted subdomain containing xp.

    Points falling in a separation gap raise, since nothing is defined
    there.  On seam points shared by several closures the first listed
    subdomain wins, mirroring locate.
    """
    pt = np.asarray(xp, float).reshape(1, 2)
    for sub in subdomains:
        off = np.asarray(sub.offset)
        if sub.shape.closure_contains(pt - off)[0]:
            return pt[0] - off
    raise ValueError(f"point {tuple(pt[0])} lies in an invalid region "
                     "(separation gap or outside the domain)")


def outside_distance(shape, pts):
    """Euclidean distance from each point to the shape's closure
    (zero inside).  Used where membership must survive floating-point
    roundtrips across translated coordinates."""
    if isinstance(shape, Rectangle):
        dx = np.maximum(np.maximum(shape.xlo - pts[:, 0],
                                   pts[:, 0] - shape.xhi), 0.0)
        dy = np.maximum(np.maximum(shape.ylo - pts[:, 1],
                                   pts[:, 1] - shape.yhi), 0.0)
        return np.hypot(dx, dy)
    if isinstance(shape, Disk):
        d = np.sqrt((pts[:, 0] - shape.cx) ** 2
                    + (pts[:, 1] - shape.cy) ** 2)
        return np.maximum(d - shape.r, 0.0)
    if isinstance(shape, RectMinusDisk):
        d = np.sqrt((pts[:, 0] - shape.hole.cx) ** 2
                    + (pts[:, 1] - shape.hole.cy) ** 2)
        into_hole = np.maximum(shape.hole.r - d, 0.0)
        return np.maximum(outside_distance(shape.rect, pts), into_hole)
    raise TypeError(f"no distance rule for {type(shape).__name__}")


def locate(pts, subdomains):
    """Subdomain id per point; first match in listing order wins.

    The listing order is how a problem encodes its half-open bracket
    conventions on shared seams.
    """
    pts = np.atleast_2d(np.asarray(pts, float))
    ids = np.full(len(pts), -1, np.int64)
    for sub in subdomains:
        undecided = ids < 0
        if not undecided.any():
            break
        mask = sub.shape.contains(pts[undecided])
        idx = np.flatnonzero(undecided)[mask]
        ids[idx] = sub.id
    if (ids < 0).any():
        bad = pts[ids < 0][0]
        raise ValueError(f"point {tuple(bad)} outside every subdomain")
    return ids


# ---------------------------------------------------------------------------
# disjointness checks (conservative pairwise tests on interiors)


def _as_bounding(shape):
    if isinstance(shape, RectMinusDisk):
        return shape.rect
    return shape


def _interiors_overlap(a, b):
    # a disk fully swallowed by the hole is disjoint from the holed
    # rectangle even though their bounding boxes overlap; this is the
    # zero-separation layout of a disk inclusion, so it needs an exact
    # answer rather than the conservative one
    if isinstance(a, Disk) and isinstance(b, RectMinusDisk):
        a, b = b, a
    if isinstance(a, RectMinusDisk) and isinstance(b, Disk):
        h = a.hole
        if np.hypot(h.cx - b.cx, h.cy - b.cy) + b.r <= h.r:
            return False
        return _interiors_overlap(a.rect, b)
    a, b = _as_bounding(a), _as_bounding(b)
    if isinstance(a, Disk) and isinstance(b, Rectangle):
        a, b = b, a
    if isinstance(a, Rectangle) and isinstance(b, Rectangle):
        return (a.xlo < b.xhi and b.xlo < a.xhi
                and a.ylo < b.yhi and b.ylo < a.yhi)
    if isinstance(a, Rectangle) and isinstance(b, Disk):
        nx = min(max(b.cx, a.xlo), a.xhi)
        ny = min(max(b.cy, a.ylo), a.yhi)
        return (nx - b.cx) ** 2 + (ny - b.cy) ** 2 < b.r**2
    if isinstance(a, Disk) and isinstance(b, Disk):
        return np.hypot(a.cx - b.cx, a.cy - b.cy) < a.r + b.r
    raise TypeError(f"no overlap test for {type(a)} vs {type(b)}")


def _translated(shape, off):
    dx, dy = off
    if isinstance(shape, Rectangle):
        return Rectangle(shape.xlo + dx, shape.ylo + dy,
                         shape.xhi + dx, shape.yhi + dy)
    if isinstance(shape, Disk):
        return Disk(shape.cx + dx, shape.cy + dy, shape.r)
    if isinstance(shape, RectMinusDisk):
        return RectMinusDisk(_translated(shape.rect, off),
                             _translated(shape.hole, off))
    raise TypeError(f"cannot translate {type(shape)}")


def check_separation(subdomains):
    """Raise when any two shifted subdomains have overlapping interiors.

    Touching boundaries are allowed.  RectMinusDisk is tested by its
    bounding rectangle, so the check is conservative: a pass guarantees
    disjointness, a failure may occasionally be a false alarm for
    exotic layouts (none of the built-in ones).
    """
    shifted = [_translated(s.shape, s.offset) for s in subdomains]
    for i in range(len(shifted)):
        for j in range(i + 1, len(shifted)):
            if _interiors_overlap(shifted[i], shifted[j]):
                raise ValueError(
                    f"shifted subdomains {subdomains[i].id} and "
                    f"{subdomains[j].id} overlap; increase the separation "
                    "distance or fix the layout")


def separation_valid(subdomains):
    try:
        check_separation(subdomains)
    except ValueError:
        return False
    return True


# ---------------------------------------------------------------------------
# sampling


def sample_interior(sub, n, rng, exclude_curves=(), exclusion_band=0.0):
    """n uniform points in the subdomain's original-coordinate shape.

    With an exclusion band, points closer than the band to any listed
    curve are redrawn (used by the unseparated baseline, where second
    derivatives on the interface itself are meaningless).
    """
    if n <= 0:
        raise ValueError("need n > 0")
    pts = sub.shape.sample(n, rng)
    if exclusion_band > 0.0 and exclude_curves:
        while True:
            near = np.zeros(len(pts), bool)
            for curve in exclude_curves:
                near |= curve.distance(pts) < exclusion_band
            if not near.any():
                break
            pts[near] = sub.shape.sample(int(near.sum()), rng)
    return pts


def sample_boundary(pieces, n_per_piece, rng):
    """Uniform points on each boundary segment, concatenated in piece
    order.  Coordinates pinned to the segment are exact."""
    return np.concatenate([p.sample(n_per_piece, rng) for p in pieces])


def _oriented_normals(iface, pts, subdomains):
    """Outward unit normals (n1 for side_minus) at interface points.

    The curve supplies normals up to sign; the sign is fixed by probing
    just off the curve midpoint and asking which side lands in the
    side_minus subdomain.
    """
    by_id = {s.id: s for s in subdomains}
    minus = by_id[iface.side_minus]
    raw = iface.curve.unit_normals(pts)
    mid = iface.curve.midpoint().reshape(1, 2)
    nm = iface.curve.unit_normals(mid)[0]
    eps = 1e-7 * max(1.0, float(np.abs(mid).max()))
    in_pos = minus.shape.closure_contains(mid + eps * nm)[0]
    in_neg = minus.shape.closure_contains(mid - eps * nm)[0]
    if in_pos == in_neg:
        raise ValueError("cannot orient interface normal against "
                         f"subdomain {iface.side_minus}")
    n1 = raw * (-1.0 if in_pos else 1.0)
    return n1, -n1


def sample_interface(iface, n, rng, subdomains):
    """Matched interface records: original point, both shifted images,
    and the two outward normals (original coordinates)."""
    if n <= 0:
        raise ValueError("need n > 0")
    by_id = {s.id: s for s in subdomains}
    x = iface.curve.sample(n, rng)
    n1, n2 = _oriented_normals(iface, x, subdomains)
    x1 = shift_points(x, by_id[iface.side_minus])
    x2 = shift_points(x, by_id[iface.side_plus])
    return x, x1, x2, n1, n2


# ---------------------------------------------------------------------------
# training set


@dataclass(frozen=True)
class SampleCounts:
    """Per-piece sample sizes: interior per subdomain, boundary per
    edge, interface per interface curve."""

    n_interior: int = 5000
    n_boundary: int = 500
    n_interface: int = 2000

    def __post_init__(self):
        if min(self.n_interior, self.n_boundary) <= 0:
            raise ValueError("interior and boundary counts must be positive")
        if self.n_interface < 0:
            raise ValueError("interface count must be nonnegative")


@dataclass
class TrainingSet:
    """Sampled collocation data, all in float64.

    tau_b: boundary points xb with shifted images xb_shift and labels gb.
    tau_r: interior points xr / xr_shift with their subdomain ids.
    tau_gamma: interface points xg with matched images xg1/xg2, outward
    normals ng1/ng2, and the interface index.
    """

    xb: np.ndarray
    xb_shift: np.ndarray
    gb: np.ndarray
    xr: np.ndarray
    xr_shift: np.ndarray
    xr_sub: np.ndarray
    xg: np.ndarray
    xg1: np.ndarray
    xg2: np.ndarray
    ng1: np.ndarray
    ng2: np.ndarray
    xg_iface: np.ndarray

    @property
    def n_boundary(self):
        return len(self.xb)

    @property
    def n_interior(self):
        return len(self.xr)

    @property
    def n_interface(self):
        return len(self.xg)

    def to_csv(self, path):
        """One row per record.  Columns: kind (b|r|g), x, y, x_shift,
        y_shift, x2_shift, y2_shift, n1x, n1y, n2x, n2y, label, region
        (subdomain for r, interface index for g, -1 otherwise).  Unused
        fields are written as 0."""
        rows = []
        for i in range(self.n_boundary):
            rows.append(("b", *self.xb[i], *self.xb_shift[i], 0, 0,
                         0, 0, 0, 0, self.gb[i], -1))
        for i in range(self.n_interior):
            rows.append(("r", *self.xr[i], *self.xr_shift[i], 0, 0,
                         0, 0, 0, 0, 0, self.xr_sub[i]))
        for i in range(self.n_interface):
            rows.append(("g", *self.xg[i], *self.xg1[i], *self.xg2[i],
                         *self.ng1[i], *self.ng2[i], 0, self.xg_iface[i]))
        header = ("kind,x,y,x_shift,y_shift,x2_shift,y2_shift,"
                  "n1x,n1y,n2x,n2y,label,region")
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for row in rows:
                fh.write(",".join(str(v) for v in row) + "\n")


def build_training_set(problem, counts, rng, include_interface=True,
                       exclusion_band=0.0):
    """Sample all collocation sets for one training run.

    problem supplies subdomains, interfaces, boundary_pieces and the
    Dirichlet data; counts has n_interior (per subdomain), n_boundary
    (per boundary piece) and n_interface (per interface).  Draw order is
    fixed, so the result is a pure function of the rng state.  With
    include_interface False (the unseparated baseline) tau_gamma is
    empty and the exclusion band keeps residual points off the
    interface curves.
    """
    subs = problem.subdomains
    check_separation(subs)
    curves = [i.curve for i in problem.interfaces]

    xr_parts, id_parts = [], []
    for sub in subs:
        pts = sample_interior(sub, counts.n_interior, rng,
                              exclude_curves=curves if exclusion_band > 0 else (),
                              exclusion_band=exclusion_band)
        xr_parts.append(pts)
        id_parts.append(np.full(len(pts), sub.id, np.int64))
    xr = np.concatenate(xr_parts)
    xr_sub = np.concatenate(id_parts)
    offsets = np.array([s.offset for s in subs])
    order = {s.id: k for k, s in enumerate(subs)}
    xr_shift = xr + offsets[[order[i] for i in xr_sub]]

    xb = sample_boundary(problem.boundary_pieces, counts.n_boundary, rng)
    xb_sub = locate(xb, subs)
    xb_shift = xb + offsets[[order[i] for i in xb_sub]]
    gb = problem.dirichlet(xb)

    if include_interface and problem.interfaces:
        parts = [sample_interface(ifc, counts.n_interface, rng, subs)
                 for ifc in problem.interfaces]
        xg = np.concatenate([p[0] for p in parts])
        xg1 = np.concatenate([p[1] for p in parts])
        xg2 = np.concatenate([p[2] for p in parts])
        ng1 = np.concatenate([p[3] for p in parts])
        ng2 = np.concatenate([p[4] for p in parts])
        xg_iface = np.concatenate([np.full(counts.n_interface, k, np.int64)
                                   for k in range(len(problem.interfaces))])
    else:
        xg = xg1 = xg2 = ng1 = ng2 = np.empty((0, 2))
        xg_iface = np.empty(0, np.int64)

    return TrainingSet(xb, xb_shift, gb, xr, xr_shift, xr_sub,
                       xg, xg1, xg2, ng1, ng2, xg_iface)
