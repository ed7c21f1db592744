"""Direction measure W_L, moment diagnostics and spherical integrals.

W_L is the solid angle of thorn axes ``v`` whose thorn ``C_v`` a path has
not touched by the time it first reaches |p| = L.  It is computed on a
direction grid from free Euler-Maruyama paths; the thorn is unclipped
(inside B_L) and two-sided.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from . import kernels
from ._backend import set_threads
from .errors import DomainError, InsufficientSignal
from .geometry import ThornSet, Z_AXIS, UnitVector, lower
from .kernels import codes
from .profiles import ThornProfile
from .sampler import DEFAULT_INNER_RADIUS, Estimate, SimConfig, q_curve

FOUR_PI = 4.0 * math.pi
GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


@dataclass
class DirectionGrid:
    """Unit directions with solid-angle weights summing to 4 pi."""

    directions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.directions = np.ascontiguousarray(self.directions, dtype=float).reshape(-1, 3)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (self.directions.shape[0],):
            raise DomainError("one weight per direction")
        nrm = np.linalg.norm(self.directions, axis=1)
        if np.any(np.abs(nrm - 1.0) > 1e-12):
            raise DomainError("directions must be unit vectors")
        if abs(float(np.sum(self.weights)) - FOUR_PI) > 1e-9:
            raise DomainError("weights must sum to 4 pi")

    @classmethod
    def fibonacci(cls, n: int) -> "DirectionGrid":
        """Fibonacci-sphere points with equal weights 4 pi / n."""
        if n < 1:
            raise DomainError("need at least one direction")
        i = np.arange(n, dtype=float)
        z = 1.0 - (2.0 * i + 1.0) / n
        rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        phi = GOLDEN_ANGLE * i
        d = np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
        d /= np.linalg.norm(d, axis=1)[:, None]
        return cls(d, np.full(n, FOUR_PI / n))

    @property
    def size(self) -> int:
        return self.directions.shape[0]

    def unit_vectors(self) -> list:
        return [UnitVector(*row) for row in self.directions]


@dataclass
class WLSample:
    """One path: W_L in steradians and the avoided-direction mask."""

    W: float
    mask: np.ndarray


@dataclass
class WLResult:
    """Output of :func:`sample_WL`.

    ``W[i, c]`` is W at checkpoint radius ``radii[c]`` (the last is L);
    ``axis_z[i, c]`` says whether path ``i`` avoided the axis-z thorn, the
    q(L) indicator on the same paths.
    """

    grid: DirectionGrid
    radii: np.ndarray
    avoid: np.ndarray
    W: np.ndarray
    axis_z: np.ndarray
    EW: Estimate
    EW2: Estimate
    q: Estimate
    fubini: Estimate
    positive: Estimate
    flags: list = field(default_factory=list)

    @property
    def samples(self) -> list:
        return [WLSample(float(self.W[i, -1]), self.avoid[i, -1].astype(bool))
                for i in range(self.W.shape[0])]

    def fubini_z(self) -> float:
        """Standardized E W_L - 4 pi q from the paired per-path differences."""
        return self.fubini.z_score(0.0)


def sample_WL(profile: ThornProfile, L: float, grid: DirectionGrid, cfg: SimConfig,
              radii: Optional[Sequence[float]] = None,
              inner_radius: float = DEFAULT_INNER_RADIUS) -> WLResult:
    """W_L on ``grid`` for ``cfg.n_paths`` free paths from the origin.

    The axis-z thorn is scanned as one extra direction, so ``q`` and the
    Fubini difference ``W - 4 pi 1{avoid z}`` come from the same paths.
    ``radii`` adds earlier checkpoints (W at smaller L, same path prefix).
    """
    if grid.size < 64:
        raise DomainError("grid needs at least 64 directions")
    rad = np.array(sorted(set([float(r) for r in (radii or [])] + [float(L)])))
    if rad[-1] != float(L) or rad[0] <= 0:
        raise DomainError("checkpoint radii must lie in (0, L]")
    eps = cfg.eps_for(L)
    obs, profs = lower([ThornSet(profile, Z_AXIS, inner_radius)], outer_L=L)
    trow = np.ascontiguousarray(obs[1])
    dirs = np.ascontiguousarray(np.vstack([grid.directions, [[0.0, 0.0, 1.0]]]))
    pids = np.arange(cfg.path_offset, cfg.path_offset + cfg.n_paths, dtype=np.int64)
    set_threads(cfg.threads)
    avoid, steps, cut = kernels.wl_kernel(dirs, profs, trow, rad, pids, np.uint64(cfg.seed),
                                          np.uint64(codes.TAG_WL), float(eps), int(cfg.max_steps),
                                          float(cfg.dt_factor))
    av = avoid[:, :, :-1]
    axis_z = avoid[:, :, -1].astype(bool)
    W = av.astype(float) @ grid.weights
    flags = ["max_steps"] if np.mean(cut) > 1e-3 else []
    meta = {"L": float(L), "profile": profile.label, "grid": grid.size, "eps": eps,
            "inner_radius": inner_radius, "dt_factor": cfg.dt_factor,
            "mean_steps": float(np.mean(steps))}
    wl = W[:, -1]
    EW = Estimate.sample_mean(wl, cfg.seed, dict(meta, quantity="EW"), flags)
    EW2 = Estimate.sample_mean(wl**2, cfg.seed, dict(meta, quantity="EW2"), flags)
    q = Estimate.bernoulli(axis_z[:, -1], cfg.seed, dict(meta, quantity="q"), flags)
    fub = Estimate.sample_mean(wl - FOUR_PI * axis_z[:, -1], cfg.seed,
                               dict(meta, quantity="EW - 4 pi q"), flags)
    pos = Estimate.bernoulli(wl > 0, cfg.seed, dict(meta, quantity="P(W > 0)"), flags)
    return WLResult(grid, rad, av, W, axis_z, EW, EW2, q, fub, pos, flags)


def second_moment_bound(EW: Estimate, EW2: Estimate, W: Optional[np.ndarray] = None) -> Estimate:
    """Cauchy-Schwarz lower bound (E W)^2 / E W^2 on P(W > 0).

    With the per-path values ``W`` the error uses the joint delta method;
    otherwise the two errors are combined as if independent.
    """
    m1, m2 = EW.mean, EW2.mean
    if not m2 > 0:
        raise InsufficientSignal("second moment is zero; the bound is undefined")
    b = m1 * m1 / m2
    if W is not None:
        W = np.asarray(W, dtype=float)
        psi = 2.0 * m1 / m2 * (W - m1) - b / m2 * (W * W - m2)
        se = float(np.std(psi, ddof=1) / math.sqrt(W.size)) if W.size > 1 else 0.0
    else:
        se = math.hypot(2.0 * m1 / m2 * EW.stderr, b / m2 * EW2.stderr)
    meta = {"quantity": "(EW)^2 / EW^2"}
    if W is not None:
        meta["positive_fraction"] = float(np.mean(W > 0))
    return Estimate(b, se, EW.n, EW.seed, meta, list(EW.flags))


# first moment -----------------------------------------------------------------

@dataclass
class FirstMomentRow:
    L: float
    q: float
    q_stderr: float
    g: float
    qg: float
    qg_stderr: float

    def to_dict(self) -> dict:
        return {"L": self.L, "q": self.q, "q_stderr": self.q_stderr, "g": self.g,
                "qg": self.qg, "qg_stderr": self.qg_stderr}


def first_moment_diag(profile: ThornProfile, L_list: Sequence[float], cfg: SimConfig,
                      inner_radius: float = DEFAULT_INNER_RADIUS) -> dict:
    """Table of (L, q(L), g(L), q g) from one coupled walk, with a trend in log L.

    The trend is the weighted least-squares slope of q g against log L and
    is reported only with two or more rows.
    """
    ests, _ = q_curve(profile, L_list, cfg, inner_radius)
    rows = []
    for e, L in zip(ests, L_list):
        g = float(profile.g(L))
        rows.append(FirstMomentRow(float(L), e.mean, e.stderr, g, e.mean * g, e.stderr * g))
    trend = None
    if len(rows) >= 2:
        x = np.log([r.L for r in rows])
        y = np.array([r.qg for r in rows])
        s = np.array([max(r.qg_stderr, 1e-300) for r in rows])
        A = np.stack([np.ones_like(x), x], axis=1) / s[:, None]
        coef, *_ = np.linalg.lstsq(A, y / s, rcond=None)
        cov = np.linalg.pinv(A.T @ A)
        slope, se = float(coef[1]), float(math.sqrt(max(cov[1, 1], 0.0)))
        trend = {"slope": slope, "stderr": se,
                 "direction": "decreasing" if slope < -2 * se else
                 "increasing" if slope > 2 * se else "flat"}
    return {"rows": rows, "trend": trend, "profile": profile.label, "seed": int(cfg.seed),
            "n": cfg.n_paths}


# spherical integrals ------------------------------------------------------------

def _loglog_interp(theta, U):
    lt, lu = np.log(theta), np.log(U)

    def f(t):
        return float(np.exp(np.interp(math.log(t), lt, lu)))
    return f


def dimension_integral(theta, U, beta: float, tail_decades: float = 1.0) -> dict:
    """2 pi int_0^pi U(t) t^-beta sin t dt for U tabulated on (0, pi].

    U is interpolated linearly in log-log coordinates.  Below the smallest
    tabulated angle ``t0`` the table is extended by ``U ~ C t^-xi``, with
    ``xi`` fitted over the lowest ``tail_decades`` of the table; the tail
    is integrated exactly and diverges when ``xi + beta >= 2``.
    """
    th = np.asarray(theta, dtype=float)
    u = np.asarray(U, dtype=float)
    order = np.argsort(th)
    th, u = th[order], u[order]
    if th.size < 2 or th[0] <= 0 or th[-1] > math.pi + 1e-12:
        raise DomainError("U must be tabulated on (0, pi] at two or more angles")
    if np.any(u <= 0):
        raise DomainError("U must be positive")
    if not 0.0 <= beta < 2.0:
        raise DomainError("beta must lie in [0, 2)")
    f = _loglog_interp(th, u)
    head = 0.0
    for lo, hi in zip(th[:-1], th[1:]):
        v, _ = integrate.quad(lambda t: f(t) * t ** -beta * math.sin(t), lo, hi,
                              epsabs=0.0, epsrel=1e-11, limit=200)
        head += v
    head *= 2.0 * math.pi
    t0 = th[0]
    sel = th <= t0 * 10.0**tail_decades
    if np.sum(sel) >= 2:
        xi = float(-np.polyfit(np.log(th[sel]), np.log(u[sel]), 1)[0])
    else:
        xi = 0.0
    C = u[0] * t0**xi
    s = xi + beta
    # a fitted exponent of 2 up to rounding means the log-divergent case
    if s >= 2.0 - 1e-9:
        tail, divergent = math.inf, True
    else:
        # t^(1-s) weight handles the endpoint singularity exactly
        v, _ = integrate.quad(lambda t: np.sinc(t / math.pi), 0.0, t0, weight="alg",
                              wvar=(1.0 - s, 0.0), epsabs=0.0, epsrel=1e-12)
        tail, divergent = 2.0 * math.pi * C * v, False
    return {"value": head + tail, "head": head, "tail": tail, "xi": xi, "theta_min": float(t0),
            "divergent": divergent, "beta": beta}


def cap_angle(profile: ThornProfile, s: float) -> float:
    """Angular radius of the thorn's cap on the sphere of radius s."""
    if s < profile.z_floor:
        raise DomainError("s must be at least z_floor")

    def h(p):
        return s * math.sin(p) - float(profile.f(max(s * math.cos(p), 0.0)))
    if h(math.pi / 2) <= 0:
        raise DomainError("the thorn covers the whole sphere")
    return optimize.brentq(h, 0.0, math.pi / 2, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def _inner(phi, theta, cos_cap):
    # integral over psi of 1/sin(angle to the rotated axis), outside its caps
    a = math.sin(phi) * math.sin(theta)
    b = math.cos(phi) * math.cos(theta)
    if a <= 1e-300:
        return 2.0 * math.pi / math.sqrt(1.0 - b * b) if abs(b) <= cos_cap else 0.0
    lo = math.acos(min(1.0, max(-1.0, (cos_cap - b) / a)))
    hi = math.acos(min(1.0, max(-1.0, (-cos_cap - b) / a)))
    if hi <= lo:
        return 0.0
    v, _ = integrate.quad(lambda p: 1.0 / math.sqrt(1.0 - (a * math.cos(p) + b) ** 2), lo, hi,
                          epsabs=0.0, epsrel=1e-12, limit=200)
    return 2.0 * v


def axis_integral(profile: ThornProfile, s: float, theta: float) -> dict:
    """int of 1/(r r') over the s-sphere minus the caps of both thorns.

    r and r' are the distances to the z axis and to the axis at angle
    ``theta``.  The integral is scale free: in polar coordinates about z
    it is the (phi, psi) integral of 1/sin(angle to the second axis).
    Also returned: the two reference bounds ``kappa1 + kappa2 |log t|``
    (kappa1 = 16 pi + 64 pi log(pi/2), kappa2 = 64 pi) and
    ``16 pi log(pi g(s))``.
    """
    if not 0.0 < theta <= math.pi:
        raise DomainError("theta must lie in (0, pi]")
    fs = float(profile.f(s))
    if not fs < s * math.sin(theta / 2):
        raise DomainError("thorn caps merge on the sphere (need f(s) < s sin(theta/2))")
    pc = cap_angle(profile, s)
    cos_cap = math.cos(pc)
    pts = sorted({p for p in (theta - pc, theta + pc, math.pi - theta - pc, math.pi - theta + pc,
                              theta, math.pi - theta) if pc < p < math.pi - pc})
    v, _ = integrate.quad(lambda p: _inner(p, theta, cos_cap), pc, math.pi - pc, points=pts or None,
                          epsabs=0.0, epsrel=1e-11, limit=400)
    k1 = 16 * math.pi + 64 * math.pi * math.log(math.pi / 2)
    k2 = 64 * math.pi
    return {"value": v, "cap_angle": pc, "kappa_bound": k1 + k2 * abs(math.log(theta)),
            "kappa1": k1, "kappa2": k2, "g_bound": 16 * math.pi * math.log(math.pi * float(profile.g(s))),
            "s": s, "theta": theta}
