import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial import cKDTree
from scipy.spatial.transform import Rotation

from thornwalk.errors import DomainError
from thornwalk.geometry import (
    Ball, CylinderSegment, Domain, ExitSphere, HalfSpace, InfiniteCylinder, ThornSet, UnitVector,
    Z_AXIS, contains, distance_lower_bound, domain_distance, domain_from_config, make_rotated_thorn,
    obstacle_from_config, path_hits, polar_axis,
)
from thornwalk.profiles import ThornProfile


def meridian_samples(t: ThornSet, n=200_000, zmax=80.0):
    """Dense points of the thorn's meridian section (z, r), boundary plus base face."""
    prof, R = t.profile, t.inner_radius
    clip = t.clip_radius or math.inf
    out = []
    z = np.concatenate([np.linspace(0.0, zmax, n), np.geomspace(1e-6, zmax, n)])
    f = prof.f(z)
    q = np.hypot(z, f)
    keep = (q >= R) & (q <= clip)
    out.append(np.c_[z[keep], f[keep]])
    ph = np.linspace(0.0, math.pi / 2, n)
    for rad in (R, clip):
        if math.isinf(rad):
            continue
        zz, rr = rad * np.cos(ph), rad * np.sin(ph)
        keep = rr <= prof.f(zz)
        out.append(np.c_[zz[keep], rr[keep]])
    f0 = float(prof.f(0.0))
    if f0 > R:
        rr = np.linspace(R, min(clip, f0), n // 10)
        out.append(np.c_[np.zeros_like(rr), rr])
    P = np.concatenate(out)
    if t.two_sided:
        P = np.concatenate([P, P * [-1.0, 1.0]])
    return P


def brute_distance(t: ThornSet, pts):
    tree = cKDTree(meridian_samples(t), balanced_tree=False, compact_nodes=False)
    a = t.axis.as_array()
    z = pts @ a
    r = np.linalg.norm(pts - z[:, None] * a, axis=1)
    return tree.query(np.c_[z, r])[0]


CASES = [
    ThornSet(ThornProfile.power(0.0)),
    ThornSet(ThornProfile.power(0.5), inner_radius=2.0),
    ThornSet(ThornProfile.subexp(1.0, 0.5), two_sided=False),
    ThornSet(ThornProfile.power(0.9), clip_radius=20.0),
    ThornSet(ThornProfile.subexp(0.3, 0.6), inner_radius=2.0, clip_radius=30.0),
    ThornSet(ThornProfile.power(0.5), axis=polar_axis(1.0)),
    ThornSet(ThornProfile.tabulated([0.5, 3.0, 100.0], [0.5, 2.0, 30.0]), clip_radius=50.0),
]


def test_polar_axis():
    assert polar_axis(0.0) == UnitVector(0.0, 0.0, 1.0)
    a = polar_axis(math.pi / 2).as_array()
    assert np.allclose(a, [1.0, 0.0, 0.0], atol=1e-16)
    assert np.allclose(polar_axis(math.pi / 3).as_array(), [math.sqrt(3) / 2, 0.0, 0.5])


def test_unit_vector_validation():
    with pytest.raises(DomainError):
        UnitVector(1.0, 1.0, 0.0)
    with pytest.raises(DomainError):
        UnitVector.normalized([0, 0, 0])


def test_membership_examples():
    cone = ThornSet(ThornProfile.power(0.0))
    assert contains(cone, (0.0, 0.0, 2.0))
    assert not contains(cone, (0.0, 0.0, 0.5))
    assert not contains(ThornSet(ThornProfile.power(0.5)), (3.0, 0.0, 4.0))
    assert contains(ThornSet(ThornProfile.power(0.5)), (2.0, 0.0, 4.0))
    one = ThornSet(ThornProfile.power(0.0), two_sided=False)
    assert contains(one, (0.0, 0.0, 3.0)) and not contains(one, (0.0, 0.0, -3.0))


def test_membership_respects_clip():
    t = ThornSet(ThornProfile.power(0.5), clip_radius=10.0)
    assert contains(t, (0.0, 0.0, 9.0))
    assert not contains(t, (0.0, 0.0, 11.0))


def test_distance_examples():
    d = distance_lower_bound(ThornSet(ThornProfile.power(0.0)), (5.0, 0.0, 0.0))
    assert 0.0 < d <= 4.0
    assert distance_lower_bound(Ball((0.0, 0.0, 10.0), 1.0), (0.0, 0.0, 0.0)) == pytest.approx(9.0, abs=1e-14)


def test_distance_near_boundary():
    cone = ThornSet(ThornProfile.power(0.0))
    for p in [(1.0 + 1e-10, 0.0, 5.0), (0.0, 1.0 + 1e-10, -7.0), (0.0, 0.0, 1.0 - 1e-10)]:
        assert distance_lower_bound(cone, p) <= 1e-6
    assert distance_lower_bound(Ball((0, 0, 0), 2.0), (2.0 + 1e-10, 0, 0)) <= 1e-6


def test_distance_zero_inside():
    assert distance_lower_bound(ThornSet(ThornProfile.power(0.0)), (0.0, 0.0, 3.0)) == 0.0


def test_domain_distance_examples():
    assert domain_distance(Domain(4.0, []), (0.0, 0.0, 1.0)) == pytest.approx(3.0)
    assert domain_distance(Domain(100.0, [Ball((0, 0, 10), 1.0)]), (0.0, 0.0, 0.0)) == pytest.approx(9.0)
    t = ThornSet(ThornProfile.power(0.5))
    d = domain_distance(Domain(10.0, [t]), (0.0, 5.0, 0.0))
    assert 0.0 < d <= 5.0
    assert d == pytest.approx(min(5.0, distance_lower_bound(t, (0.0, 5.0, 0.0))))


def test_domain_distance_errors():
    with pytest.raises(DomainError):
        domain_distance(Domain(4.0, []), (0.0, 0.0, 5.0))
    with pytest.raises(DomainError):
        domain_distance(Domain(4.0, [Ball((0, 0, 0), 1.0)]), (0.0, 0.0, 0.5))


@pytest.mark.parametrize("t", CASES, ids=lambda t: f"{t.profile.label}-R{t.inner_radius}-c{t.clip_radius}")
def test_distance_sound_and_efficient(t, rng):
    pts = rng.uniform(-25.0, 25.0, size=(10_000, 3))
    pts = pts[~contains(t, pts)]
    d = distance_lower_bound(t, pts)
    true = brute_distance(t, pts)
    assert np.all(d <= true + 1e-9)
    assert np.all(d[true > 1e-6] > 0)
    if t.profile.family in ("power", "subexp"):
        assert np.min(d / true) >= 0.5


def test_distance_simple_obstacles(rng):
    pts = rng.uniform(-5, 5, size=(2000, 3))
    b = Ball((1.0, -1.0, 0.5), 1.5)
    exact = np.maximum(np.linalg.norm(pts - b.center, axis=1) - 1.5, 0.0)
    assert np.allclose(distance_lower_bound(b, pts), exact, atol=1e-12)
    h = HalfSpace((0.0, 0.0, 1.0), 2.0)
    assert np.allclose(distance_lower_bound(h, pts), np.maximum(2.0 - pts[:, 2], 0.0), atol=1e-12)
    c = InfiniteCylinder((0, 0, 0), (0, 0, 1), 1.0)
    rad = np.hypot(pts[:, 0], pts[:, 1])
    assert np.allclose(distance_lower_bound(c, pts), np.maximum(rad - 1.0, 0.0), atol=1e-12)
    ce = InfiniteCylinder((0, 0, 0), (0, 0, 1), 4.0, exterior=True)
    assert np.allclose(distance_lower_bound(ce, pts), np.maximum(4.0 - rad, 0.0), atol=1e-12)
    s = ExitSphere(6.0)
    assert np.allclose(distance_lower_bound(s, pts), np.maximum(6.0 - np.linalg.norm(pts, axis=1), 0.0), atol=1e-12)


def test_cylinder_segment_distance(rng):
    seg = CylinderSegment((0, 0, 0.5), (0, 0, 0.75), 0.01)
    pts = rng.uniform(-1, 1, size=(2000, 3))
    # flat caps: distance to the rectangle [0.5, 0.75] x [0, 0.01] in (z, rho)
    dz = np.maximum(np.maximum(0.5 - pts[:, 2], pts[:, 2] - 0.75), 0.0)
    dr = np.maximum(np.hypot(pts[:, 0], pts[:, 1]) - 0.01, 0.0)
    exact = np.hypot(dz, dr)
    d = distance_lower_bound(seg, pts)
    assert np.all(d <= exact + 1e-12)
    assert np.all(d >= 0.5 * exact)


def test_clipping_monotone(rng):
    pts = rng.uniform(-30, 30, size=(10_000, 3))
    for t in CASES[:3]:
        clipped = t.clipped(15.0)
        inner = contains(clipped, pts)
        assert np.all(contains(t, pts)[inner])
        assert np.all(np.linalg.norm(pts[inner], axis=1) <= 15.0 + 1e-12)


def test_rotation_equivariance(rng):
    rots = Rotation.random(10_000, random_state=5)
    pts = rng.uniform(-20, 20, size=(10_000, 3))
    base = ThornSet(ThornProfile.power(0.5))
    ref = contains(base, pts)
    moved = rots.apply(pts)
    axes = rots.apply(np.array([0.0, 0.0, 1.0]))
    # group the rotated thorns into a few batches by sharing the axis
    for k in range(0, 10_000, 500):
        for i in range(k, k + 500, 50):
            t = base.with_axis(UnitVector.normalized(axes[i]))
            assert contains(t, moved[i]) == ref[i]


def test_rotation_about_axis_leaves_membership(rng):
    t = ThornSet(ThornProfile.subexp(0.5, 0.5))
    pts = rng.uniform(-20, 20, size=(5000, 3))
    spin = Rotation.from_rotvec(np.outer(rng.uniform(0, 2 * math.pi, 5000), [0, 0, 1.0]))
    assert np.array_equal(contains(t, pts), contains(t, spin.apply(pts)))


def test_make_rotated_thorn():
    t = make_rotated_thorn(ThornProfile.power(0.0), math.pi / 2)
    assert contains(t, (5.0, 0.0, 0.0)) and not contains(t, (0.0, 0.0, 5.0))
    with pytest.raises(DomainError):
        make_rotated_thorn(ThornProfile.power(0.0), 4.0)


def test_path_hits_examples():
    cone = ThornSet(ThornProfile.power(0.0))
    assert path_hits(cone, [(0.0, 0.0, 3.0)])
    assert not path_hits(cone, [(10.0, 10.0, 0.0), (10.5, 10.0, 0.0), (10.5, 10.5, 0.0)])
    assert path_hits(cone, [(-3.0, 0.0, 5.0), (3.0, 0.0, 5.0)])
    assert path_hits(Ball((0, 0, 0), 1.0), [(-3.0, 0.1, 0.0), (3.0, 0.1, 0.0)])
    assert not path_hits(Ball((0, 0, 0), 1.0), [(-3.0, 1.1, 0.0), (3.0, 1.1, 0.0)])


def test_path_hits_against_segment_cylinder_oracle(rng):
    cone = ThornSet(ThornProfile.power(0.0))
    checked = 0
    while checked < 300:
        z = rng.uniform(2.0, 20.0) * rng.choice([-1, 1])
        a = rng.uniform(-4, 4, 2)
        b = rng.uniform(-4, 4, 2)
        ab = b - a
        t = np.clip(-a @ ab / (ab @ ab), 0.0, 1.0)
        dmin = np.linalg.norm(a + t * ab)
        if abs(dmin - 1.0) < 1e-3:
            continue
        got = path_hits(cone, [(a[0], a[1], z), (b[0], b[1], z)])
        assert got == (dmin <= 1.0)
        checked += 1


@settings(max_examples=40, deadline=None)
@given(st.floats(0.5, 5.0), st.tuples(*[st.floats(-8, 8)] * 3), st.tuples(*[st.floats(-8, 8)] * 3))
def test_ball_distance_property(r, c, p):
    b = Ball(c, r)
    exact = max(math.dist(c, p) - r, 0.0)
    assert distance_lower_bound(b, p) == pytest.approx(exact, abs=1e-9)


def test_config_roundtrip():
    dom = Domain(20.0, [ThornSet(ThornProfile.power(0.5), polar_axis(0.3), 2.0, 10.0, False),
                        Ball((0, 0, 5), 1.0), CylinderSegment((0, 0, 0), (0, 0, 1), 0.1),
                        HalfSpace((0, 0, 1), 3.0), InfiniteCylinder((0, 0, 0), (1, 0, 0), 2.0, True),
                        ExitSphere(5.0)])
    back = domain_from_config(dom.to_config())
    assert back.obstacles[1:] == dom.obstacles[1:]
    t0, t1 = dom.obstacles[0], back.obstacles[0]
    assert np.allclose(t0.axis.as_array(), t1.axis.as_array(), rtol=0, atol=1e-15)
    assert t0.with_axis(t1.axis) == t1
    assert back.to_config()["L"] == 20.0
    with pytest.raises(DomainError):
        obstacle_from_config({"type": "torus"})
