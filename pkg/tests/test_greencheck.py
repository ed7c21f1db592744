import itertools
import math

import numpy as np
import pytest

from conftest import cfg
from thornwalk import exact
from thornwalk.errors import DomainError
from thornwalk.geometry import Domain
from thornwalk.greencheck import (
    NORMALIZATION, ShellGreen, band_green, clean_green_balls_mc, clean_green_concentric,
    lemma_substitute_check, shell_green_radial,
)
from thornwalk.profiles import ThornProfile
from thornwalk.sampler import occupation_band

CONE = ThornProfile.power(0.0)


def test_shell_green_vanishes_at_boundaries():
    sg = ShellGreen(1.0, 4.0)
    assert sg.normalization == NORMALIZATION
    for r in (1.5, 2.0, 3.5):
        assert shell_green_radial(sg, r, 1.0) == pytest.approx(0.0, abs=1e-15)
        assert shell_green_radial(sg, r, 4.0) == pytest.approx(0.0, abs=1e-15)
        assert shell_green_radial(sg, r, 1.0 + 1e-8) < 1e-6
    with pytest.raises(DomainError):
        shell_green_radial(sg, 2.0, 5.0)


def test_shell_green_exchange_symmetry(rng):
    sg = ShellGreen(0.7, 9.0)
    for r, rho in rng.uniform(0.7, 9.0, size=(200, 2)):
        a = shell_green_radial(sg, r, rho) / rho**2
        b = shell_green_radial(sg, rho, r) / r**2
        assert a == pytest.approx(b, rel=1e-10)
        assert a >= 0


def test_shell_green_expected_exit_time():
    # E_r[exit time] of the radial part integrates G_rad over the shell
    a, b, r = 1.0, 4.0, 2.0
    t = band_green(ShellGreen(a, b), r, a, b)
    # u(r) solving u''/2 + u'/r = -1, u(a) = u(b) = 0
    A = (b * b - a * a) / 3.0 / (1 / a - 1 / b)
    u = -r * r / 3.0 + A * (1 / a - 1 / r) + a * a / 3.0
    assert t == pytest.approx(u, rel=1e-10)


def test_shell_green_band_matches_occupation():
    sg = ShellGreen(1.0, 4.0)
    from thornwalk.geometry import Ball
    dom = Domain(4.0, [Ball((0.0, 0.0, 0.0), 1.0)])
    occ = occupation_band(dom, 2.4, 2.6, cfg(4000, start=(2.0, 0.0, 0.0)))
    assert abs(occ.mean - band_green(sg, 2.0, 2.4, 2.6)) <= 3 * occ.stderr


def test_concentric_identity_example():
    r = clean_green_concentric(1.0, 2.0, 3.0, 8.0)
    assert r["rel_diff"] <= 1e-6
    assert r["rhs"] >= r["h1"] * r["h2"]
    assert r["lhs"] == pytest.approx(exact.sphere_escape_prob(2.0, 3.0, 8.0))


def test_concentric_identity_grid():
    for a, ap, y in itertools.product((0.5, 1.0, 1.5), (2.0, 2.5, 3.0), (4.0, 5.0, 6.0)):
        r = clean_green_concentric(a, ap, y, 8.0)
        assert r["rel_diff"] <= 1e-6, (a, ap, y)
        assert r["correction"] >= 0.0


def test_concentric_equal_sets():
    r = clean_green_concentric(2.0, 2.0, 3.0, 8.0)
    assert r["correction"] >= 0
    assert r["lhs"] == pytest.approx(r["h1"]) and r["lhs"] >= r["h1"] ** 2
    assert r["rel_diff"] <= 1e-6


def test_concentric_near_outer_boundary():
    r = clean_green_concentric(1.0, 2.0, 0.999 * 8.0, 8.0)
    assert abs(r["lhs"] - 1.0) <= 1e-3
    assert abs(r["rhs"] - r["lhs"]) <= 1e-4


def test_concentric_ordering():
    with pytest.raises(DomainError):
        clean_green_concentric(2.0, 1.0, 3.0, 8.0)


def _agree(r):
    return abs(r["diff"]) <= max(0.05 * r["lhs"].mean, 3 * r["diff_stderr"])


def test_balls_far_apart_independent():
    r = clean_green_balls_mc((0, 0, 6), 0.5, (0, 0, -6), 0.5, 16.0, cfg(20_000, seed=5),
                             n_points=512, m_fd=256)
    h = r["h1"].mean * r["h2"].mean
    assert abs(r["lhs"].mean - h) <= 3 * math.hypot(r["lhs"].stderr, 2 * r["h1"].stderr)
    assert abs(r["correction"].mean) <= 3 * r["correction"].stderr + 0.01
    assert _agree(r)


def test_balls_identical():
    r = clean_green_balls_mc((0, 0, 3), 1.0, (0, 0, 3), 1.0, 8.0, cfg(20_000, seed=5),
                             n_points=1024, m_fd=256)
    assert r["lhs"].mean == r["h1"].mean  # same set, same paths
    assert _agree(r)


def test_balls_narrow_gap():
    r = clean_green_balls_mc((0, 0, 1.5), 1.0, (0, 0, -1.5), 1.0, 8.0, cfg(20_000, seed=5),
                             n_points=1024, m_fd=256)
    assert _agree(r)


def test_balls_origin_must_be_outside():
    with pytest.raises(DomainError):
        clean_green_balls_mc((0, 0, 0.5), 1.0, (0, 0, -3), 1.0, 8.0, cfg(10))


def test_substitute_trivial_when_unreachable():
    r = lemma_substitute_check(CONE, 1.0, math.pi / 2, cfg(200), check_regular=False)
    assert r["lhs"].mean == 1.0 and r["rhs"].mean == 2.0 and r["holds"]


def test_substitute_holds_L40():
    r = lemma_substitute_check(CONE, 40.0, math.pi / 2, cfg(10_000, seed=3))
    if r["status"] == "irregular":
        pytest.skip("L = 40 came out irregular at this seed")
    assert r["holds"]


def test_substitute_stable_under_more_paths():
    a = lemma_substitute_check(CONE, 20.0, math.pi / 2, cfg(4000, seed=9), check_regular=False)
    b = lemma_substitute_check(CONE, 20.0, math.pi / 2, cfg(8000, seed=9), check_regular=False)
    assert a["holds"] == b["holds"]


def test_substitute_irregular_reported(monkeypatch):
    import thornwalk.greencheck as gc

    real = gc.estimate_U

    def fake(*args, **kw):
        e = real(*args, **kw)
        e.meta["regular"] = False
        return e

    monkeypatch.setattr(gc, "estimate_U", fake)
    r = lemma_substitute_check(CONE, 20.0, math.pi / 2, cfg(1000))
    assert r["status"] == "irregular" and r["rhs"] is None and r["holds"] is None
