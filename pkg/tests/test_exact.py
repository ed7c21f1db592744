import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from thornwalk import exact
from thornwalk.errors import DomainError, SingularInputError
from thornwalk.exact import BoundParams
from thornwalk.profiles import ThornProfile

P = BoundParams()


def test_radial_hit_prob_examples():
    assert exact.radial_hit_prob(1, 2, 4) == pytest.approx(0.5, rel=1e-15)
    assert exact.radial_hit_prob(1, 1, 4) == 1.0
    assert exact.radial_hit_prob(1, 4, 4) == 0.0
    with pytest.raises(DomainError):
        exact.radial_hit_prob(2, 1, 4)


def test_sphere_escape_prob_examples():
    assert exact.sphere_escape_prob(1, 2, 4) == pytest.approx(2 / 3, rel=1e-15)
    assert exact.sphere_escape_prob(1, 1, 4) == 0.0
    assert exact.sphere_escape_prob(1, 4, 4) == 1.0
    with pytest.raises(DomainError):
        exact.sphere_escape_prob(1, 5, 4)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 10), st.floats(0.0, 1.0), st.floats(1.01, 1e4))
def test_radial_complement_sums_to_one(v1, t, ratio):
    v3 = v1 * ratio
    v2 = v1 * ratio**t
    hit = exact.radial_hit_prob(v1, v2, v3)
    miss = (math.log(v2) - math.log(v1)) / (math.log(v3) - math.log(v1))
    assert hit + miss == pytest.approx(1.0, abs=1e-12)
    assert 0.0 <= hit <= 1.0


def test_sphere_escape_monotone_and_limit():
    rs = np.linspace(1.0, 4.0, 50)
    vals = [exact.sphere_escape_prob(1.0, r, 4.0) for r in rs]
    assert np.all(np.diff(vals) > 0)
    for a, r in [(1.0, 2.0), (0.5, 3.0), (2.0, 2.5)]:
        assert exact.sphere_escape_prob(a, r, 1e9 * a) == pytest.approx(1 - a / r, abs=1e-9)


def test_sphere_escape_grad_matches_derivative():
    a, b = 1.0, 4.0
    for r in (1.5, 2.0, 3.0):
        h = 1e-6
        fd = (exact.sphere_escape_prob(a, r + h, b) - exact.sphere_escape_prob(a, r - h, b)) / (2 * h)
        assert exact.sphere_escape_grad(a, r, b) == pytest.approx(fd, rel=1e-7)


def test_cyl_escape_bound():
    p = P.with_(c_cyl=0.5)
    assert exact.cyl_escape_bound(p, 1, 2) == pytest.approx(0.25)
    assert exact.cyl_escape_bound(p, 1, 4) == pytest.approx(0.0625)
    with pytest.raises(DomainError):
        exact.cyl_escape_bound(p, 1, 1.5)


def test_free_green():
    assert exact.free_green((0, 0, 0), (1, 0, 0)) == pytest.approx(1 / (2 * math.pi))
    assert exact.free_green((0, 0, 0), (0.5, 0, 0)) == pytest.approx(2 * exact.free_green((0, 0, 0), (1, 0, 0)))
    for d in (0.1, 1.0, 7.0):
        assert exact.free_green((0, 0, 0), (0, d, 0)) <= 1 / d
    with pytest.raises(SingularInputError):
        exact.free_green((1, 2, 3), (1, 2, 3))


def test_params_validation_and_roundtrip():
    with pytest.raises(DomainError):
        BoundParams(c_cyl=1.0)
    with pytest.raises(DomainError):
        BoundParams.from_dict({"c_cly": 0.5})
    assert BoundParams.from_dict(P.to_dict()) == P
    # c_tilde log c_cyl <= -2
    assert 20 * math.log(0.9) == pytest.approx(-2.107, abs=5e-4)
    P.with_(c_tilde=20.0, c_cyl=0.9).check_ladder()
    with pytest.raises(DomainError):
        P.with_(c_tilde=1.0, c_cyl=0.9).check_ladder()
    with pytest.raises(DomainError):
        P.with_(alpha=2.4).check_ladder()
    with pytest.raises(DomainError):
        P.with_(k0=2).check_ladder()


def test_ladder_m3_high_precision():
    mp.mp.dps = 50
    ref = 3 * mp.log(3) ** 3
    step = exact.ladder(P, 3)
    assert step.m == pytest.approx(float(ref), rel=1e-14)
    assert step.m == pytest.approx(3.97791, abs=1e-5)


def test_ladder_rows_consistent():
    for k in (3, 10, 40):
        s = exact.ladder(P, k)
        lk = math.log(k)
        assert s.log_r == pytest.approx(k * lk**3)
        assert s.log_q == pytest.approx(s.log_r - math.log(4.0) - math.log(lk))
        assert s.log_d - s.log_r == pytest.approx(math.log(4.0) + math.log(lk))
        d = s.to_dict()
        assert d["k"] == k
    assert exact.ladder(P, 3).to_dict()["r"] == pytest.approx(math.exp(3 * math.log(3) ** 3))
    assert exact.ladder(P, 200).to_dict()["r"] is None
    with pytest.raises(DomainError):
        exact.ladder(P, 2)


def test_ladder_increasing():
    r = [exact.ladder(P, k).log_r for k in range(3, 51)]
    assert np.all(np.diff(r) > 0)


def test_qL_lower_bound_closed_sum():
    log_L = exact.ladder(P, 10).log_r
    want = -2 * math.fsum(1 / k + 3 / (k * math.log(k)) for k in range(3, 12))
    assert exact.qL_lower_bound(P, log_L) == pytest.approx(want, rel=1e-14)
    assert exact.j_of_L(P, log_L) == 11


def test_qL_gamma_scaling_and_monotone():
    log_L = exact.ladder(P, 10).log_r
    a = exact.qL_lower_bound(P.with_(gamma=0.5), log_L)
    b = exact.qL_lower_bound(P.with_(gamma=0.75), log_L)
    assert b == pytest.approx(2 * a, rel=1e-14)
    vals = [exact.qL_lower_bound(P, exact.ladder(P, k).log_r) for k in range(3, 30)]
    assert np.all(np.diff(vals) <= 0)
    with pytest.raises(DomainError):
        exact.qL_lower_bound(P, 1.0)


def test_U_upper_bound_power():
    v, clamped = exact.U_upper_bound_power(P.with_(zeta=0.0, M=1.0), math.exp(-100.0))
    assert v == pytest.approx(1e4, rel=1e-12) and not clamped
    v, clamped = exact.U_upper_bound_power(P, 0.5)
    assert clamped and v == P.M
    th = np.geomspace(1e-12, 0.05, 40)
    vals = [exact.U_upper_bound_power(P, t)[0] for t in th]
    assert np.all(np.diff(vals) < 0)


def test_U_bound_integrable():
    # the bound times sin t is integrable at 0: the tail below t0 shrinks to 0
    f = lambda t: exact.U_upper_bound_power(P, t)[0] * math.sin(t)
    tails = [integrate.quad(f, 10.0**-k, 10.0**-(k - 2), limit=200)[0] for k in (6, 10, 14)]
    assert tails[0] > tails[1] > tails[2] > 0
    total = integrate.quad(f, 1e-30, math.pi / 2, limit=400, points=[math.exp(-math.e)])[0]
    assert math.isfinite(total)


def test_converse_q_bound():
    r = exact.converse_q_bound(P.with_(K1=0.1), 100, alpha=1.0)
    mp.mp.dps = 30
    ref = mp.fsum(mp.log(1 - mp.mpf("0.1") / mp.sqrt(j)) for j in range(1, 101))
    assert r["log_bound"] == pytest.approx(float(ref), rel=1e-13)
    assert r["log_bound"] <= r["comparison"]
    assert r["log_bound"] == pytest.approx(-1.8, abs=0.1)
    assert exact.converse_q_bound(P, 0)["log_bound"] == 0.0
    vals = [exact.converse_q_bound(P.with_(K1=0.1), k, 1.0)["log_bound"] for k in range(0, 50)]
    assert np.all(np.diff(vals) < 0)
    with pytest.raises(DomainError):
        exact.converse_q_bound(P.with_(K1=2.0), 5, alpha=1.0)


def test_u_theta_solution():
    prof = ThornProfile.power(0.5)
    assert exact.u_theta_solution(P, prof, 1.0, math.e, math.e) == P.b_R
    v = exact.u_theta_solution(P, prof, 1.0, math.e, math.exp(10.0))
    assert v == pytest.approx(math.exp(3.6), rel=1e-9)
    assert exact.u_theta_solution(P, prof, 0.1, math.e, math.exp(10.0)) > v
    assert exact.u_theta_solution(P, prof, 1.0, math.e, math.exp(20.0)) > v
    with pytest.raises(DomainError):
        exact.u_theta_solution(P, prof, 1.0, 1.0, 10.0)  # g(1) = 1


def test_k1_helpers():
    assert exact.k1_large(0.1) == 3
    assert exact.k1_small(P, math.exp(-4.0)) == pytest.approx(math.exp(2.0))
    with pytest.raises(DomainError):
        exact.k1_small(P, 1.5)


def test_evaluators_deterministic():
    a = [exact.qL_lower_bound(P, 50.0), exact.converse_q_bound(P.with_(K1=0.1), 77, 1.0)["log_bound"]]
    b = [exact.qL_lower_bound(P, 50.0), exact.converse_q_bound(P.with_(K1=0.1), 77, 1.0)["log_bound"]]
    assert a == b
