"""Shape, transform, and sampling checks."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dspinn import geometry as geo
from dspinn import problems

ALL_NAMES = ["ex1", "ex3", "ex4", "ex5", "smooth_sanity"]


def test_shift_identity_and_translation():
    prob = problems.builtin("ex1", d=0.1)
    left, right = prob.subdomains
    np.testing.assert_array_equal(geo.shift((0.5, 0.5), left), [0.5, 0.5])
    np.testing.assert_allclose(geo.shift((0.7, 0.5), right), [0.8, 0.5],
                               rtol=0, atol=1e-15)


def test_shift_outside_subdomain_rejected():
    prob = problems.builtin("ex1")
    with pytest.raises(ValueError):
        geo.shift((0.9, 0.5), prob.subdomains[0])


@pytest.mark.parametrize("name", ALL_NAMES)
def test_shift_map_back_roundtrip(name):
    prob = problems.builtin(name)
    rng = np.random.default_rng(0)
    for sub in prob.subdomains:
        pts = sub.shape.sample(2500, rng)
        for p in pts[:200]:
            q = geo.map_back(geo.shift(p, sub), prob.subdomains)
            np.testing.assert_allclose(q, p, rtol=0, atol=1e-14)


def test_map_back_gap_is_invalid():
    prob = problems.builtin("ex1", d=0.1)
    with pytest.raises(ValueError, match="invalid region"):
        geo.map_back((2.0 / 3.0 + 0.05, 0.5), prob.subdomains)


def test_locate_bracket_conventions():
    ex1 = problems.builtin("ex1")
    assert geo.locate([(0.5, 0.5)], ex1.subdomains)[0] == 0
    assert geo.locate([(2.0 / 3.0, 0.5)], ex1.subdomains)[0] == 0
    assert geo.locate([(0.7, 0.5)], ex1.subdomains)[0] == 1
    ex4 = problems.builtin("ex4")
    assert geo.locate([(0.0, 0.0)], ex4.subdomains)[0] == 0
    assert geo.locate([(1.0, 0.0)], ex4.subdomains)[0] == 1
    assert geo.locate([(1.5, 1.5)], ex4.subdomains)[0] == 1


def test_locate_outside_domain_rejected():
    prob = problems.builtin("ex1")
    with pytest.raises(ValueError, match="outside"):
        geo.locate([(1.5, 0.5)], prob.subdomains)


def test_disk_sampling_uniformity():
    rng = np.random.default_rng(7)
    disk = geo.Disk(0.0, 0.0, 1.0)
    pts = disk.sample(100_000, rng)
    frac = np.mean(pts[:, 0] ** 2 + pts[:, 1] ** 2 < 0.25)
    assert abs(frac - 0.25) < 0.02


def test_sampling_deterministic():
    shape = geo.RectMinusDisk(geo.Rectangle(-2, -2, 2, 2), geo.Disk(0, 0, 1))
    a = shape.sample(500, np.random.default_rng(42))
    b = shape.sample(500, np.random.default_rng(42))
    np.testing.assert_array_equal(a, b)
    assert not shape.hole.contains(a).any()


def test_interior_points_locate_to_their_subdomain():
    for name in ALL_NAMES:
        prob = problems.builtin(name)
        rng = np.random.default_rng(3)
        for sub in prob.subdomains:
            pts = geo.sample_interior(sub, 400, rng)
            assert (geo.locate(pts, prob.subdomains) == sub.id).all()


def test_boundary_points_pinned_exactly():
    prob = problems.builtin("ex1")
    rng = np.random.default_rng(1)
    pts = geo.sample_boundary(prob.boundary_pieces, 50, rng)
    on_edge = ((pts[:, 0] == 0.0) | (pts[:, 0] == 1.0)
               | (pts[:, 1] == 0.0) | (pts[:, 1] == 1.0))
    assert on_edge.all()


def test_interface_records_ex1():
    prob = problems.builtin("ex1", d=0.1)
    rng = np.random.default_rng(5)
    x, x1, x2, n1, n2 = geo.sample_interface(prob.interfaces[0], 100, rng,
                                             prob.subdomains)
    assert (x[:, 0] == 2.0 / 3.0).all()
    np.testing.assert_array_equal(x1, x)          # left side unmoved
    np.testing.assert_allclose(x2 - x, [[0.1, 0.0]] * 100, atol=1e-15)
    np.testing.assert_array_equal(n1, [[1.0, 0.0]] * 100)
    np.testing.assert_array_equal(n2, [[-1.0, 0.0]] * 100)


def test_interface_records_circle_normals():
    prob = problems.builtin("ex4", d=3.5)
    rng = np.random.default_rng(2)
    x, x1, x2, n1, n2 = geo.sample_interface(prob.interfaces[0], 200, rng,
                                             prob.subdomains)
    r = np.linalg.norm(x, axis=1)
    np.testing.assert_allclose(r, 1.0, atol=1e-12)
    # n1 is outward for the disk, i.e. radial
    np.testing.assert_allclose(n1, x / r[:, None], atol=1e-12)
    np.testing.assert_array_equal(n1 + n2, np.zeros_like(n1))
    np.testing.assert_allclose(x1 - x, [[3.5, 0.0]] * 200, atol=1e-15)
    np.testing.assert_array_equal(x2, x)


@pytest.mark.parametrize("name", ALL_NAMES)
def test_matched_pair_offset_difference(name):
    prob = problems.builtin(name)
    rng = np.random.default_rng(11)
    by_id = {s.id: s for s in prob.subdomains}
    for ifc in prob.interfaces:
        x, x1, x2, _, _ = geo.sample_interface(ifc, 300, rng, prob.subdomains)
        want = (np.asarray(by_id[ifc.side_plus].offset)
                - np.asarray(by_id[ifc.side_minus].offset))
        np.testing.assert_allclose(x2 - x1, np.tile(want, (300, 1)),
                                   rtol=0, atol=1e-15)


def test_separation_validity():
    assert geo.separation_valid(problems.builtin("ex1", d=1e-6).subdomains)
    assert geo.separation_valid(problems.builtin("ex4", d=3.5).subdomains)
    assert not geo.separation_valid(problems.builtin("ex4", d=2.9).subdomains)
    with pytest.raises(ValueError, match="overlap"):
        geo.check_separation(problems.builtin("ex4", d=1.0).subdomains)


def test_separation_valid_at_default_for_all():
    for name in ALL_NAMES:
        prob = problems.builtin(name)
        geo.check_separation(prob.subdomains)


def test_build_training_set_shapes_and_determinism():
    prob = problems.builtin("ex1", d=0.1)
    counts = geo.SampleCounts(200, 40, 80)
    ts1 = geo.build_training_set(prob, counts, np.random.default_rng(9))
    ts2 = geo.build_training_set(prob, counts, np.random.default_rng(9))
    assert ts1.n_interior == 400 and ts1.n_boundary == 160
    assert ts1.n_interface == 80
    for a, b in [(ts1.xr, ts2.xr), (ts1.xb, ts2.xb), (ts1.xg, ts2.xg),
                 (ts1.gb, ts2.gb)]:
        np.testing.assert_array_equal(a, b)
    # shifted coordinates really are originals plus the owning offset
    off = np.array([prob.subdomains[i].offset for i in ts1.xr_sub])
    np.testing.assert_array_equal(ts1.xr_shift, ts1.xr + off)


def test_build_without_interface_uses_exclusion_band():
    prob = problems.builtin("ex1", d=0.0)
    counts = geo.SampleCounts(500, 20, 10)
    ts = geo.build_training_set(prob, counts, np.random.default_rng(4),
                                include_interface=False, exclusion_band=1e-3)
    assert ts.n_interface == 0
    assert (np.abs(ts.xr[:, 0] - 2.0 / 3.0) >= 1e-3).all()
    np.testing.assert_array_equal(ts.xr, ts.xr_shift)


def test_training_set_csv_export(tmp_path):
    prob = problems.builtin("smooth_sanity")
    counts = geo.SampleCounts(20, 5, 10)
    ts = geo.build_training_set(prob, counts, np.random.default_rng(0))
    path = tmp_path / "points.csv"
    ts.to_csv(path)
    lines = path.read_text().strip().split("\n")
    assert len(lines) == 1 + ts.n_boundary + ts.n_interior + ts.n_interface
    assert lines[0].startswith("kind,x,y")


@settings(max_examples=40, deadline=None)
@given(x=st.floats(-3, 3), y=st.floats(-3, 3))
def test_rectangle_contains_matches_bounds(x, y):
    rect = geo.Rectangle(-1.0, -0.5, 1.0, 2.0)
    inside = (-1.0 <= x <= 1.0) and (-0.5 <= y <= 2.0)
    assert rect.contains(np.array([[x, y]]))[0] == inside


def test_invalid_counts_rejected():
    with pytest.raises(ValueError):
        geo.SampleCounts(0, 10, 10)
