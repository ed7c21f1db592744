import math

import numpy as np
import pytest

from conftest import cfg, within
from thornwalk import exact
from thornwalk.errors import DomainError, InsufficientSignal
from thornwalk.geometry import Ball, CylinderSegment, Domain, ThornSet
from thornwalk.profiles import ThornProfile
from thornwalk.sampler import (
    Estimate, SimConfig, coupled_q, cyl_escape_mc, cylinder_avoid_curve, cylinder_avoid_prob,
    em_escape_prob, em_first_passage, estimate_c_cyl, estimate_q, estimate_q2, estimate_U,
    hitting_density_polar, isotonic_check, occupation_density, q_curve, radial_hit_mc, run_em,
    run_wos, wos_escape_prob,
)

SHELL = Domain(4.0, [Ball((0.0, 0.0, 0.0), 1.0)])
CONE = ThornProfile.power(0.0)

# slope of |wos(eps) - 2/3| on the shell benchmark (0.19 over eps in [0.0125, 0.2] at
# 4e5 paths), rounded up to leave room for the noise of one run
SHELL_BIAS_C = 0.24

BENCH = {
    "shell": (SHELL, (2.0, 0.0, 0.0)),
    "offset_ball": (Domain(5.0, [Ball((2.0, 0.0, 0.0), 1.0)]), (0.0, 0.0, 0.0)),
    "cone_thorn": (Domain(10.0, [ThornSet(CONE, inner_radius=2.0)]), (0.0, 0.0, 0.0)),
    "cyl_segment": (Domain(2.0, [CylinderSegment((0, 0, 0.5), (0, 0, 1.5), 0.2)]), (0.0, 0.0, 0.0)),
    "two_balls": (Domain(6.0, [Ball((0, 0, 2), 0.8), Ball((0, 0, -2), 0.8)]), (0.5, 0.0, 0.0)),
}


def test_config_validation():
    with pytest.raises(DomainError):
        SimConfig(n_paths=0)
    with pytest.raises(DomainError):
        SimConfig(seed=-1)
    with pytest.raises(DomainError):
        SimConfig(eps_shell=0.0)
    c = SimConfig(seed=3)
    assert c.eps_for(20.0) == pytest.approx(2e-3)
    assert c.with_(eps_shell=0.1).eps_for(20.0) == 0.1


def test_estimate_helpers():
    e = Estimate.bernoulli([True, False, True, True], 5)
    assert e.mean == 0.75 and e.stderr == pytest.approx(math.sqrt(0.75 * 0.25 / 4))
    m = Estimate.sample_mean([1.0, 2.0, 3.0], 5)
    assert m.mean == 2.0 and m.stderr == pytest.approx(1 / math.sqrt(3))
    assert m.to_dict()["provenance"] == "MC"


def test_wos_shell_exact_law():
    e = wos_escape_prob(SHELL, cfg(40_000, start=(2.0, 0.0, 0.0)))
    assert within(e, 2 / 3)


def test_wos_no_obstacle_and_eps_start():
    assert wos_escape_prob(Domain(4.0, []), cfg(500)).mean == 1.0
    e = wos_escape_prob(SHELL, cfg(500, start=(1.0 + 2e-4, 0.0, 0.0)))
    assert e.mean <= 0.01


def test_unbounded_empty_domain_rejected():
    with pytest.raises(DomainError):
        run_wos(Domain(math.inf, []), cfg(10))


def test_invalid_start():
    with pytest.raises(DomainError):
        wos_escape_prob(SHELL, cfg(10, start=(0.5, 0.0, 0.0)))
    with pytest.raises(DomainError):
        wos_escape_prob(SHELL, cfg(10, start=(5.0, 0.0, 0.0)))


def test_shell_bias_control():
    prev = None
    for eps in (0.1, 0.05, 0.025):
        e = wos_escape_prob(SHELL, cfg(400_000, seed=4, start=(2.0, 0.0, 0.0), eps_shell=eps))
        gap = abs(e.mean - 2 / 3)
        assert gap <= max(3 * e.stderr, SHELL_BIAS_C * eps)
        if prev is not None:
            assert gap <= prev + 3 * e.stderr
        prev = gap


def test_radial_hit_mc():
    e = radial_hit_mc(1.0, 2.0, 4.0, cfg(20_000))
    assert within(e, exact.radial_hit_prob(1.0, 2.0, 4.0))


def test_determinism_and_thread_independence():
    c = cfg(3000, seed=99)
    a = estimate_q(CONE, 20.0, False, c)
    b = estimate_q(CONE, 20.0, False, c.with_(threads=4))
    assert (a.mean, a.stderr) == (b.mean, b.stderr)


def test_path_offset_chunking_is_exact():
    dom, s = BENCH["cone_thorn"]
    full = run_wos(dom, cfg(1000, start=s))
    lo = run_wos(dom, cfg(400, start=s))
    hi = run_wos(dom, cfg(600, start=s, path_offset=400))
    assert np.array_equal(full.term, np.concatenate([lo.term, hi.term]))
    assert np.array_equal(full.exitp, np.concatenate([lo.exitp, hi.exitp]))


def test_em_brownian_scaling():
    res = run_em(Domain(1e6, []), cfg(20_000, sigma_max=0.05), t_max=2.0)
    msd = np.mean(np.sum(res.endp**2, axis=1))
    assert msd == pytest.approx(3 * 2.0, rel=0.02)
    assert np.allclose(res.t, 2.0)


def test_em_shell_and_dt_halving():
    a = em_escape_prob(SHELL, cfg(20_000, start=(2.0, 0.0, 0.0)))
    b = em_escape_prob(SHELL, cfg(20_000, seed=12, start=(2.0, 0.0, 0.0), dt_factor=0.125))
    assert within(a, 2 / 3)
    assert abs(a.mean - b.mean) <= 3 * math.hypot(a.stderr, b.stderr)


@pytest.mark.parametrize("name", sorted(BENCH))
def test_engines_agree(name):
    dom, s = BENCH[name]
    w = wos_escape_prob(dom, cfg(20_000, seed=2, start=s))
    e = em_escape_prob(dom, cfg(5000, seed=2, start=s))
    assert abs(w.mean - e.mean) <= 3 * math.hypot(w.stderr, e.stderr)


def test_em_first_passage_replays_run_em():
    c = cfg(8, seed=21, start=(2.0, 0.0, 0.0))
    res = run_em(SHELL, c)
    for i in range(8):
        one = em_first_passage(SHELL, c, path_index=i)
        assert one["outcome"] == ("escaped" if res.escaped()[i] else "absorbed")
        assert one["steps"] == res.steps[i]
        poly = one["polyline"]
        assert np.allclose(poly[0], c.start)
        assert np.allclose(poly[-1], res.endp[i])


def test_q_trivial_when_thorn_out_of_reach():
    e = estimate_q(CONE, 1.5, False, cfg(500))  # inner radius 2
    assert e.mean == 1.0


def test_q_curve_nested():
    ests, ind = q_curve(CONE, [5.0, 10.0, 20.0, 40.0], cfg(3000))
    assert np.all(ind[:, 1:] <= ind[:, :-1])
    means = [e.mean for e in ests]
    assert means == sorted(means, reverse=True)


def test_q_at_L100_two_shells():
    a = estimate_q(CONE, 100.0, False, cfg(8000, seed=5))
    b = estimate_q(CONE, 100.0, False, cfg(8000, seed=6, eps_shell=0.005))
    assert 0.0 < a.mean < 1.0
    assert abs(a.mean - b.mean) <= 3 * math.hypot(a.stderr, b.stderr)


def test_q2_pathwise_below_q():
    for L in (10.0, 30.0):
        for th in (0.3, math.pi / 2, math.pi):
            y1, y2 = coupled_q(CONE, L, th, False, cfg(2000))
            assert not np.any(y2 & ~y1)
    e = estimate_q2(CONE, 20.0, math.pi / 2, True, cfg(2000))
    assert e.meta["violations"] == 0 and e.mean <= e.meta["q"]


def test_q2_one_sided_antipodal_is_two_sided_q():
    both = estimate_q2(CONE, 20.0, math.pi, False, cfg(20_000, seed=8), two_sided=False)
    single = estimate_q(CONE, 20.0, False, cfg(20_000, seed=9))
    assert abs(both.mean - single.mean) <= 3 * math.hypot(both.stderr, single.stderr)


def test_q2_region_L50():
    e = estimate_q2(CONE, 50.0, math.pi / 2, False, cfg(4000))
    q = e.meta["q"]
    assert e.mean <= q
    assert e.mean >= 0.0


def test_q2_theta_range():
    with pytest.raises(DomainError):
        estimate_q2(CONE, 10.0, 0.0, False, cfg(10))


def test_U_two_far_balls_near_one():
    # a near outer sphere couples the two events; keep it far away
    dom = Domain(200.0, [Ball((6.0, 0.0, 0.0), 0.5), Ball((-6.0, 0.0, 0.0), 0.5)])
    res = run_wos(dom, cfg(40_000), soft=[True, True])
    a, b, ab = res.escaped([0]), res.escaped([1]), res.escaped([0, 1])
    pa, pb, pab = a.mean(), b.mean(), ab.mean()
    # delta method for pab / (pa pb) on shared paths
    psi = ab / (pa * pb) - pab / (pa**2 * pb) * a - pab / (pa * pb**2) * b
    se = np.std(psi, ddof=1) / math.sqrt(a.size)
    assert abs(pab / (pa * pb) - 1.0) <= 3 * se


def test_U_trend_in_theta():
    prof = ThornProfile.power(0.5)
    us = [estimate_U(prof, 50.0, th, cfg(6000, seed=31), check_regular=False)
          for th in (math.pi / 2, math.pi / 4, math.pi / 8)]
    assert all(u.mean >= 0 for u in us)
    assert us[2].mean > us[0].mean
    assert us[2].mean - us[0].mean > 2 * math.hypot(us[2].stderr, us[0].stderr)


def test_U_regularity_meta():
    u = estimate_U(CONE, 20.0, math.pi / 2, cfg(2000))
    assert isinstance(u.meta["regular"], bool)
    assert u.meta["regular"] == (u.mean >= u.meta["U_quarter"])


def test_U_insufficient_signal():
    with pytest.raises(InsufficientSignal):
        estimate_U(CONE, 2000.0, math.pi / 2, cfg(20), check_regular=False)


def test_occupation_free_space_proxy():
    e = occupation_density(Domain(40.0, []), (2.0, 0.0, 0.0), 0.25, cfg(4000))
    free = exact.free_green((0, 0, 0), (2, 0, 0))
    assert abs(e.mean - free) <= 0.1 * free
    assert free == pytest.approx(1 / (4 * math.pi))


def test_occupation_shadowed_probe():
    free = occupation_density(Domain(20.0, []), (2.0, 0.0, 0.0), 0.25, cfg(4000))
    shade = occupation_density(Domain(20.0, [Ball((1.0, 0.0, 0.0), 0.5)]), (2.0, 0.0, 0.0), 0.25, cfg(4000))
    assert shade.mean + 3 * shade.stderr < free.mean


def test_occupation_ball_size_consistency():
    a = occupation_density(Domain(20.0, []), (2.0, 0.0, 0.0), 0.25, cfg(4000))
    b = occupation_density(Domain(20.0, []), (2.0, 0.0, 0.0), 0.125, cfg(4000, seed=17))
    assert abs(a.mean - b.mean) <= 3 * math.hypot(a.stderr, b.stderr)


def test_occupation_probe_errors():
    with pytest.raises(DomainError):
        occupation_density(SHELL, (1.1, 0.0, 0.0), 0.25, cfg(10, start=(2.5, 0, 0)))
    with pytest.raises(DomainError):
        occupation_density(Domain(4.0, []), (0.1, 0.0, 0.0), 0.25, cfg(10))


def test_polar_uniform_without_obstacle():
    h = hitting_density_polar(Domain(10.0, []), 6, cfg(20_000), fold=False)
    assert h["escaped"] == 20_000
    assert np.all(np.abs(h["density"] - 1.0) <= 3 * h["stderr"] + 1e-12)
    assert isotonic_check(h["density"], h["stderr"])["passed"]


def test_polar_cone_thorn_isotonic():
    dom = Domain(20.0, [ThornSet(CONE, inner_radius=2.0)])
    h = hitting_density_polar(dom, 8, cfg(20_000))
    assert isotonic_check(h["density"], h["stderr"])["passed"]
    assert h["density"][0] < h["density"][-1]


def test_isotonic_rejects_decreasing():
    vals = np.linspace(1.0, 0.5, 8)
    assert not isotonic_check(vals, np.full(8, 0.01))["passed"]


def test_c_cyl_estimate():
    e = estimate_c_cyl(cfg(20_000))
    assert 0.0 < e.mean < 1.0
    per = e.meta["per_start"]
    assert per[0] == max(per)
    assert all(p == 0.0 for p in per[1:])  # starts on the wall
    assert within(e, exact.DEFAULT_C_CYL, k=4)


def test_slab_escape_below_c_cyl_power():
    c = estimate_c_cyl(cfg(20_000))
    worst = max(cyl_escape_mc(3.0, cfg(20_000, seed=3)), key=lambda x: x.mean)
    assert worst.mean <= c.mean**3 + 3 * worst.stderr


def test_cylinder_avoid_monotone():
    cur = cylinder_avoid_curve([1e-2, 1e-3, 1e-4], cfg(2000))
    for ests in cur["estimates"].values():
        p = [e.mean for e in ests]
        assert p[0] <= p[1] <= p[2]
    single = cylinder_avoid_prob(0.05, cfg(2000))
    assert all(0.0 < e.mean < 1.0 for e in single)
    with pytest.raises(DomainError):
        cylinder_avoid_curve([0.2], cfg(10))


def test_soft_obstacles_never_rescue_paths():
    dom = Domain(8.0, [ThornSet(CONE, inner_radius=2.0), Ball((3.0, 0.0, 0.0), 1.0)])
    res = run_wos(dom, cfg(5000), soft=[True, True])
    assert not np.any(res.escaped([0, 1]) & ~res.escaped([0]))
    assert not np.any(res.escaped([0, 1]) & ~res.escaped([1]))
