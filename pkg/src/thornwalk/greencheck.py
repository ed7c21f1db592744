"""Checks of the two-set avoidance identity P = h1 h2 + int grad h1 . grad h2 G.

For absorbing sets C1, C2 in B_L, h_i(x) is the probability of reaching
|x| = L before C_i and G is the occupation density (Green function for
the generator Laplacian / 2) of B_L minus both sets.  Then
``h1 h2`` has the boundary values of P(avoid both) and
``Laplacian(h1 h2) / 2 = grad h1 . grad h2``, which gives the identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from . import exact
from .errors import DomainError
from .geometry import Ball, Domain, Z_AXIS, ThornSet, make_rotated_thorn
from .kernels import codes
from .profiles import ThornProfile
from .sampler import (
    DEFAULT_INNER_RADIUS, Estimate, SimConfig, estimate_q2, estimate_U, run_wos,
)

NORMALIZATION = "laplacian/2"


@dataclass(frozen=True)
class ShellGreen:
    """Brownian motion in a' < |x| < L, absorbed at both spheres."""

    a_prime: float
    L: float
    normalization: str = NORMALIZATION

    def __post_init__(self):
        if not 0 < self.a_prime < self.L:
            raise DomainError("need 0 < a' < L")

    def radial(self, r: float, rho: float) -> float:
        return shell_green_radial(self, r, rho)


def shell_green_radial(sg: ShellGreen, r: float, rho: float) -> float:
    """Occupation density in the radius: E_r int phi(|B|) dt = int G_rad(r, rho) phi(rho) drho.

    With scale function s(x) = -1/x the one-dimensional Green function of
    the radial part is 2 (s(min) - s(a'))(s(L) - s(max)) / (s(L) - s(a'))
    times the speed density rho^2.
    """
    a, b = sg.a_prime, sg.L
    if not (a <= r <= b and a <= rho <= b):
        raise DomainError("radii must lie in [a', L]")
    lo, hi = min(r, rho), max(r, rho)
    return 2.0 * rho * rho * (1.0 / a - 1.0 / lo) * (1.0 / hi - 1.0 / b) / (1.0 / a - 1.0 / b)


def band_green(sg: ShellGreen, r: float, rho1: float, rho2: float) -> float:
    """Expected time in rho1 <= |B| <= rho2 from radius r."""
    pts = [r] if rho1 < r < rho2 else None
    v, _ = integrate.quad(lambda p: shell_green_radial(sg, r, p), rho1, rho2, points=pts,
                          epsabs=0.0, epsrel=1e-12)
    return v


def clean_green_concentric(a: float, a_prime: float, y_radius: float, L: float) -> dict:
    """Both sides of the identity for C1 = ball(a), C2 = ball(a'), a <= a', from radius y.

    C1 is inside C2, so P(avoid both) = h2(y) exactly.
    """
    if not (0 < a <= a_prime < y_radius <= L and a_prime < L):
        raise DomainError("need 0 < a <= a' < y <= L")
    h1 = exact.sphere_escape_prob(a, y_radius, L)
    h2 = exact.sphere_escape_prob(a_prime, y_radius, L)
    lhs = h2
    sg = ShellGreen(a_prime, L)

    def integrand(rho):
        return (exact.sphere_escape_grad(a, rho, L) * exact.sphere_escape_grad(a_prime, rho, L)
                * shell_green_radial(sg, y_radius, rho))

    pts = [y_radius] if a_prime < y_radius < L else None
    corr, err = integrate.quad(integrand, a_prime, L, points=pts, epsabs=0.0, epsrel=1e-13, limit=200)
    rhs = h1 * h2 + corr
    return {"lhs": lhs, "rhs": rhs, "h1": h1, "h2": h2, "correction": corr,
            "quad_error": err, "rel_diff": abs(lhs - rhs) / lhs if lhs else abs(rhs),
            "provenance": "formula"}


# Monte-Carlo version for two balls ------------------------------------------------

def _unit_dirs(rng, n):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1)[:, None]


_STENCIL = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float)


def _fd_gradients(dom: Domain, x: np.ndarray, delta: float, m: int, cfg: SimConfig,
                  base: int, tag: int) -> np.ndarray:
    """Central-difference gradients of the escape probability at each row of x.

    All six stencil points of a given x share the same ``m`` path streams.
    """
    nx = x.shape[0]
    starts = (x[:, None, None, :] + delta * _STENCIL[None, :, None, :]).repeat(m, axis=2)
    ids = base + np.arange(nx, dtype=np.int64)[:, None, None] * m + np.arange(m, dtype=np.int64)[None, None, :]
    ids = np.broadcast_to(ids, (nx, 6, m))
    res = run_wos(dom, cfg, starts=starts.reshape(-1, 3), pids=ids.reshape(-1), tag=tag,
                  validate=False)
    h = res.escaped().reshape(nx, 6, m).mean(axis=2)
    return np.stack([h[:, 0] - h[:, 1], h[:, 2] - h[:, 3], h[:, 4] - h[:, 5]], axis=1) / (2 * delta)


def clean_green_balls_mc(center1, r1: float, center2, r2: float, L: float, cfg: SimConfig,
                         n_points: int = 2048, m_fd: int = 512, region_radius: Optional[float] = None,
                         batch: int = 64) -> dict:
    """Monte-Carlo estimates of both sides for two balls, started at the origin.

    * lhs and h1(0), h2(0) come from one walk with both balls as soft
      components, so the three indicators share paths.
    * The correction integral is sampled with density proportional to
      1/|x| on B_R (R = ``region_radius``, default L); points within the
      finite-difference step of a boundary contribute zero.
    * grad h_i uses central differences with step r1/20 and ``m_fd``
      common-random-number paths per stencil point, with independent
      streams for h1 and h2 so their product is unbiased.
    * G(0, x) / free_green(0, x) = 1 - |x| E_x[1/|B_exit|] is sampled by
      one WoS path from x in B_L minus both balls.
    """
    c1 = np.asarray(center1, dtype=float)
    c2 = np.asarray(center2, dtype=float)
    R = L if region_radius is None else float(region_radius)
    if not 0 < R <= L:
        raise DomainError("region radius must lie in (0, L]")
    same = np.allclose(c1, c2) and r1 == r2
    if not same and np.linalg.norm(c1 - c2) <= r1 + r2:
        raise DomainError("balls must be disjoint (or identical)")
    for c, r in ((c1, r1), (c2, r2)):
        if np.linalg.norm(c) + r > L / 2:
            raise DomainError("balls must lie inside B_{L/2}")
        if np.linalg.norm(c) <= r:
            raise DomainError("origin must lie outside both balls")
    eps = cfg.eps_for(L)
    b1, b2 = Ball(tuple(c1), r1), Ball(tuple(c2), r2)
    both = Domain(L, [b1, b2])
    res = run_wos(both, cfg.with_(start=(0.0, 0.0, 0.0)), soft=[True, True])
    y_both = res.escaped([0, 1]).astype(float)
    y1 = res.escaped([0]).astype(float)
    y2 = res.escaped([1]).astype(float)
    lhs = Estimate.bernoulli(y_both > 0, cfg.seed, {"quantity": "P(avoid both)"}, res.flags())
    h1 = Estimate.bernoulli(y1 > 0, cfg.seed, {"quantity": "h1(0)"})
    h2 = Estimate.bernoulli(y2 > 0, cfg.seed, {"quantity": "h2(0)"})
    # h1 h2 from shared paths: (1/n^2) sum_i sum_j y1_i y2_j, unbiased up to the
    # diagonal; use the U-statistic that drops it
    n = y1.size
    prod = (y1.sum() * y2.sum() - float(np.dot(y1, y2))) / (n * (n - 1))
    # delta-method error of the product of means
    psi_prod = h2.mean * (y1 - h1.mean) + h1.mean * (y2 - h2.mean)

    rng = np.random.Generator(np.random.Philox(key=[int(cfg.seed), codes.TAG_AUX]))
    delta = r1 / 20.0
    Z = R * R  # int over B_R of 1/(2 pi |x|)
    d1, d2 = Domain(L, [b1]), Domain(L, [b2])
    vals = np.zeros(n_points)
    for lo in range(0, n_points, batch):
        k = min(batch, n_points - lo)
        rad = R * np.sqrt(rng.random(k))
        x = rad[:, None] * _unit_dirs(rng, k)
        ok = ((np.linalg.norm(x - c1, axis=1) > r1 + delta + eps)
              & (np.linalg.norm(x - c2, axis=1) > r2 + delta + eps)
              & (np.linalg.norm(x, axis=1) < L - delta - eps))
        xi = np.ascontiguousarray(x[ok])
        if xi.shape[0] == 0:
            continue
        idx = lo + np.flatnonzero(ok)
        base = m_fd * lo
        g1 = _fd_gradients(d1, xi, delta, m_fd, cfg, base, codes.TAG_AUX)
        g2 = _fd_gradients(d2, xi, delta, m_fd, cfg, base, codes.TAG_AUX2)
        wr = run_wos(both, cfg, starts=xi, pids=idx.astype(np.int64), tag=codes.TAG_GREEN,
                     validate=False)
        ratio = 1.0 - np.linalg.norm(xi, axis=1) / np.linalg.norm(wr.exitp, axis=1)
        vals[idx] = Z * np.sum(g1 * g2, axis=1) * ratio
    corr = Estimate.sample_mean(vals, cfg.seed, {"quantity": "correction", "region_radius": R,
                                                 "fd_step": delta, "m_fd": m_fd})
    rhs_mean = prod + corr.mean
    rhs_se = math.sqrt(float(np.var(psi_prod, ddof=1)) / n + corr.stderr**2)
    rhs = Estimate(rhs_mean, rhs_se, n, int(cfg.seed),
                   {"quantity": "h1 h2 + correction", "h1h2": prod, "correction": corr.mean,
                    "correction_stderr": corr.stderr})
    flags = []
    for e in (lhs, h1, h2):
        if e.mean == 0 or e.stderr / e.mean > 0.2:
            flags.append("inconclusive")
            break
    diff = lhs.mean - rhs.mean
    # lhs and h1 h2 share paths; the difference of their influence terms
    # gives the paired error
    psi_diff = (y_both - lhs.mean) - psi_prod
    diff_se = math.sqrt(float(np.var(psi_diff, ddof=1)) / n + corr.stderr**2)
    return {"lhs": lhs, "rhs": rhs, "h1": h1, "h2": h2, "correction": corr, "diff": diff,
            "diff_stderr": diff_se, "flags": flags}


# substitute inequality for thorn pairs --------------------------------------------

def lemma_substitute_check(profile: ThornProfile, L: float, theta: float, cfg: SimConfig,
                           inner_radius: float = DEFAULT_INNER_RADIUS, check_regular: bool = True) -> dict:
    """q~(L, t) against 2 E[h1 h2 at the exit point of B_{L/4}] for thorns clipped at L/2.

    Paths from the origin run by WoS until they hit either thorn or the
    sphere of radius L/4; at each exit point h1 and h2 are sampled by one
    independent walk each, so h1 h2 is estimated without bias.  If L is
    irregular (U(L) < U(L/4)) the check is skipped.
    """
    lhs = estimate_q2(profile, L, theta, True, cfg, inner_radius)
    out = {"lhs": lhs, "L": L, "theta": theta, "profile": profile.label}
    if check_regular:
        u = estimate_U(profile, L, theta, cfg, clipped=True, inner_radius=inner_radius)
        out["U"] = u.mean
        out["U_quarter"] = u.meta["U_quarter"]
        if not u.meta["regular"]:
            out.update(status="irregular", rhs=None, holds=None)
            return out
    C = ThornSet(profile, Z_AXIS, inner_radius, L / 2)
    Ct = make_rotated_thorn(profile, theta, inner_radius=inner_radius, clip_radius=L / 2)
    eps = cfg.eps_for(L)
    inner = run_wos(Domain(L / 4, [C, Ct]), cfg.with_(start=(0.0, 0.0, 0.0)), eps=eps)
    esc = inner.escaped()
    y = np.zeros(inner.n)
    if np.any(esc):
        xs = np.ascontiguousarray(inner.exitp[esc])
        # pull the exit point just inside the shell so it is a valid start
        nr = np.linalg.norm(xs, axis=1)[:, None]
        xs = xs * np.minimum(1.0, (L / 4 - eps / 2) / nr)
        pid = np.flatnonzero(esc).astype(np.int64) + cfg.path_offset
        r1 = run_wos(Domain(L, [C]), cfg, starts=xs, pids=pid, tag=codes.TAG_AUX, eps=eps,
                     validate=False)
        r2 = run_wos(Domain(L, [Ct]), cfg, starts=xs, pids=pid, tag=codes.TAG_AUX2, eps=eps,
                     validate=False)
        y[esc] = 2.0 * (r1.escaped() & r2.escaped())
    rhs = Estimate.sample_mean(y, cfg.seed, {"quantity": "2 E[h1 h2; exit B_{L/4}]",
                                             "q_quarter": float(np.mean(esc))},
                               inner.flags())
    holds = lhs.mean <= rhs.mean + 3.0 * math.hypot(lhs.stderr, rhs.stderr)
    out.update(status="checked", rhs=rhs, holds=bool(holds))
    return out
