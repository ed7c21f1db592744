"""First-passage Monte Carlo: walk-on-spheres, adaptive Euler-Maruyama and estimators.

Walk-on-spheres (WoS) handles every escape probability.  Components of a
domain are either *terminal* (the walk stops there) or *soft* (the first
hit is recorded and the walk carries on).  Soft components let one walk
answer several nested questions with common randomness: q(L) and q(L, t)
come from the same trajectories, so the pathwise inequality between them
holds by construction.

Every path ``i`` draws from its own Philox stream keyed by ``(seed, tag)``
and counter ``(step, path_offset + i)``; results are therefore identical
for any thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import stats
from scipy.optimize import isotonic_regression

from . import kernels
from ._backend import set_threads
from .errors import DomainError, InsufficientSignal
from .geometry import (
    CylinderSegment, Domain, ExitSphere, HalfSpace, InfiniteCylinder, ThornSet, Z_AXIS,
    check_start, make_rotated_thorn,
)
from .kernels import codes
from .profiles import ThornProfile

DEFAULT_INNER_RADIUS = 2.0
MAX_STEPS_WARN = 1e-3


@dataclass
class SimConfig:
    """Monte-Carlo settings.

    ``eps_shell=None`` means ``1e-4 * L`` for the domain at hand.
    """

    seed: int = 0
    n_paths: int = 10_000
    eps_shell: Optional[float] = None
    dt_factor: float = 0.25
    max_steps: int = 1_000_000
    start: tuple = (0.0, 0.0, 0.0)
    sigma_max: float = math.inf
    threads: int = 1
    path_offset: int = 0

    def __post_init__(self):
        if self.n_paths < 1:
            raise DomainError("n_paths must be >= 1")
        if self.eps_shell is not None and not self.eps_shell > 0:
            raise DomainError("eps_shell must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if not self.dt_factor > 0:
            raise DomainError("dt_factor must be positive")
        self.start = tuple(float(c) for c in self.start)

    def eps_for(self, L: float) -> float:
        if self.eps_shell is not None:
            return float(self.eps_shell)
        return 1e-4 * L

    def with_(self, **kw) -> "SimConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return {
            "seed": int(self.seed), "n_paths": self.n_paths, "eps_shell": self.eps_shell,
            "dt_factor": self.dt_factor, "max_steps": self.max_steps, "start": list(self.start),
            "sigma_max": None if math.isinf(self.sigma_max) else self.sigma_max,
            "path_offset": self.path_offset,
        }


@dataclass
class Estimate:
    """A Monte-Carlo estimate with its standard error."""

    mean: float
    stderr: float
    n: int
    seed: int
    meta: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    @classmethod
    def bernoulli(cls, ind, seed, meta=None, flags=None) -> "Estimate":
        ind = np.asarray(ind, dtype=bool)
        n = ind.size
        p = float(np.sum(ind)) / n
        return cls(p, math.sqrt(p * (1 - p) / n), n, int(seed), dict(meta or {}), list(flags or []))

    @classmethod
    def sample_mean(cls, x, seed, meta=None, flags=None) -> "Estimate":
        x = np.asarray(x, dtype=float)
        n = x.size
        m = float(np.sum(x)) / n
        sd = float(np.sqrt(np.sum((x - m) ** 2) / max(n - 1, 1)))
        return cls(m, sd / math.sqrt(n), n, int(seed), dict(meta or {}), list(flags or []))

    def z_score(self, value: float) -> float:
        if self.stderr == 0:
            return 0.0 if self.mean == value else math.inf
        return (self.mean - value) / self.stderr

    def to_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "n": self.n, "seed": self.seed,
                "provenance": "MC", "meta": self.meta, "flags": self.flags}


@dataclass
class WalkResult:
    """Per-path WoS output.

    ``hits[i, k]`` is the step at which path ``i`` first came within the
    shell of kernel component ``k`` (-1 if never).  Obstacle ``j`` of the
    domain is component ``j + offset``.
    """

    term: np.ndarray
    hits: np.ndarray
    exitp: np.ndarray
    steps: np.ndarray
    offset: int
    seed: int

    @property
    def n(self) -> int:
        return self.term.size

    @property
    def max_steps_fraction(self) -> float:
        return float(np.mean(self.term == codes.TERM_MAX_STEPS))

    def reached(self, k: int) -> np.ndarray:
        return self.hits[:, k] >= 0

    def escaped(self, avoid: Sequence[int] = None, target: int = 0) -> np.ndarray:
        """Paths that reach component ``target`` strictly before any of ``avoid``.

        ``avoid`` lists obstacle indices (default: all obstacles).
        """
        if avoid is None:
            avoid = range(self.hits.shape[1] - self.offset)
        s_t = self.hits[:, target]
        ok = s_t >= 0
        for j in avoid:
            h = self.hits[:, j + self.offset]
            ok &= (h < 0) | (h > s_t)
        return ok

    def flags(self) -> list:
        return ["max_steps"] if self.max_steps_fraction > MAX_STEPS_WARN else []


def _path_ids(cfg: SimConfig, n: int) -> np.ndarray:
    return np.arange(cfg.path_offset, cfg.path_offset + n, dtype=np.int64)


def _starts(start, n: int) -> np.ndarray:
    s = np.asarray(start, dtype=float)
    if s.ndim == 1:
        s = np.broadcast_to(s, (n, 3))
    return np.ascontiguousarray(s, dtype=float)


def run_wos(domain: Domain, cfg: SimConfig, soft: Sequence[bool] = (), starts=None,
            pids=None, tag: int = codes.TAG_WOS, eps: Optional[float] = None,
            validate: bool = True) -> WalkResult:
    """Run WoS paths; ``starts`` may be one point or an (n, 3) array."""
    if not domain.has_outer and not domain.obstacles:
        raise DomainError("domain has no boundary")
    eps = cfg.eps_for(domain.L if domain.has_outer else 1.0) if eps is None else eps
    if starts is None:
        starts = cfg.start
    n = cfg.n_paths if np.ndim(starts) == 1 else np.shape(starts)[0]
    S = _starts(starts, n)
    if validate:
        for p in (np.unique(S, axis=0) if S.shape[0] > 1 else S)[:64]:
            check_start(domain, p)
    ids = _path_ids(cfg, n) if pids is None else np.ascontiguousarray(pids, dtype=np.int64)
    obs, profs = domain.lower(soft)
    set_threads(cfg.threads)
    term, hits, exitp, steps = kernels.wos_kernel(obs, profs, S, ids, np.uint64(cfg.seed), np.uint64(tag),
                                                  float(eps), int(cfg.max_steps))
    return WalkResult(term, hits, exitp, steps, domain.outer_offset, int(cfg.seed))


def wos_escape_prob(domain: Domain, cfg: SimConfig) -> Estimate:
    """P(reach the outer sphere before any obstacle) from ``cfg.start``."""
    if not domain.has_outer:
        raise DomainError("escape probability needs a finite outer radius")
    res = run_wos(domain, cfg)
    eps = cfg.eps_for(domain.L)
    return Estimate.bernoulli(res.escaped(), cfg.seed, {"L": domain.L, "eps": eps, "engine": "wos",
                                                        "mean_steps": float(np.mean(res.steps))},
                              res.flags())


# Euler-Maruyama ------------------------------------------------------------

def _probe_array(kind=codes.PROBE_NONE, center=(0.0, 0.0, 0.0), r1=0.0, r2=0.0, floor=0.0):
    a = np.zeros(codes.PROBE_WIDTH)
    a[0] = kind
    a[1:4] = center
    a[4] = r1
    a[5] = r2
    a[6] = floor
    return a


@dataclass
class EMResult:
    occ: np.ndarray
    term: np.ndarray
    hits: np.ndarray
    endp: np.ndarray
    steps: np.ndarray
    t: np.ndarray
    offset: int
    seed: int

    def escaped(self, avoid: Sequence[int] = None) -> np.ndarray:
        if avoid is None:
            avoid = range(self.hits.shape[1] - self.offset)
        s_t = self.hits[:, 0]
        ok = s_t >= 0
        for j in avoid:
            h = self.hits[:, j + self.offset]
            ok &= (h < 0) | (h > s_t)
        return ok

    def flags(self) -> list:
        return ["max_steps"] if np.mean(self.term == codes.TERM_MAX_STEPS) > MAX_STEPS_WARN else []


def run_em(domain: Domain, cfg: SimConfig, probe=None, t_max: float = 0.0, starts=None,
           eps: Optional[float] = None, tag: int = codes.TAG_EM, validate: bool = True) -> EMResult:
    """Adaptive EM paths run to absorption (or to ``t_max`` if positive)."""
    if not domain.has_outer and not domain.obstacles:
        raise DomainError("domain has no boundary")
    eps = cfg.eps_for(domain.L if domain.has_outer else 1.0) if eps is None else eps
    if starts is None:
        starts = cfg.start
    n = cfg.n_paths if np.ndim(starts) == 1 else np.shape(starts)[0]
    S = _starts(starts, n)
    if validate:
        check_start(domain, S[0])
    probe = _probe_array() if probe is None else probe
    obs, profs = domain.lower()
    set_threads(cfg.threads)
    out = kernels.em_kernel(obs, profs, S, _path_ids(cfg, n), np.uint64(cfg.seed), np.uint64(tag),
                            float(eps), int(cfg.max_steps), float(cfg.dt_factor), float(cfg.sigma_max),
                            probe, float(t_max))
    return EMResult(*out, domain.outer_offset, int(cfg.seed))


def em_escape_prob(domain: Domain, cfg: SimConfig) -> Estimate:
    res = run_em(domain, cfg)
    return Estimate.bernoulli(res.escaped(), cfg.seed, {"L": domain.L, "engine": "em",
                                                        "dt_factor": cfg.dt_factor}, res.flags())


def em_first_passage(domain: Domain, cfg: SimConfig, path_index: int = 0, probe=None,
                     keep_every: int = 1, near: Optional[float] = None,
                     cap: int = 100_000) -> dict:
    """One EM path with its decimated polyline.

    The path is the same one ``run_em`` produces for path number
    ``cfg.path_offset + path_index``.  If the polyline would exceed ``cap``
    vertices, the path is replayed with the keep stride doubled.
    """
    check_start(domain, cfg.start)
    eps = cfg.eps_for(domain.L if domain.has_outer else 1.0)
    near = 10 * eps if near is None else near
    probe = _probe_array() if probe is None else probe
    obs, profs = domain.lower()
    start = np.asarray(cfg.start, dtype=float)
    pid = cfg.path_offset + path_index
    while True:
        verts, nv, over, code, steps, t, hits, occ = kernels.em_record_kernel(
            obs, profs, start, pid, np.uint64(cfg.seed), np.uint64(codes.TAG_EM), float(eps),
            int(cfg.max_steps), float(cfg.dt_factor), float(cfg.sigma_max), probe,
            int(keep_every), float(near), int(cap))
        if not over:
            break
        keep_every *= 2
    off = domain.outer_offset
    escaped = domain.has_outer and hits[0] >= 0 and all(
        h < 0 or h > hits[0] for h in hits[off:])
    if code == codes.TERM_MAX_STEPS:
        outcome = "max_steps"
    else:
        outcome = "escaped" if escaped else "absorbed"
    return {"outcome": outcome, "polyline": np.array(verts[:nv]), "occupation": float(occ),
            "steps": int(steps), "time": float(t), "keep_every": int(keep_every),
            "terminal": int(code)}


# thorn estimators -------------------------------------------------------------

def _thorn(profile, axis, L, clipped, inner_radius, two_sided):
    return ThornSet(profile, axis, inner_radius, L / 2 if clipped else None, two_sided)


def thorn_walk(profile: ThornProfile, L: float, thetas: Sequence[float], clipped: bool,
               cfg: SimConfig, inner_radius: float = DEFAULT_INNER_RADIUS,
               two_sided: bool = True) -> WalkResult:
    """One coupled WoS run with the axis-z thorn and one rotated thorn per theta, all soft."""
    obst = [_thorn(profile, Z_AXIS, L, clipped, inner_radius, two_sided)]
    for th in thetas:
        t = make_rotated_thorn(profile, th, inner_radius=inner_radius,
                               clip_radius=L / 2 if clipped else None, two_sided=two_sided)
        obst.append(t)
    dom = Domain(L, obst)
    return run_wos(dom, cfg.with_(start=(0.0, 0.0, 0.0)), soft=[True] * len(obst))


def _meta(profile, L, clipped, cfg, inner_radius, **kw):
    m = {"L": L, "profile": profile.label, "clipped": clipped, "eps": cfg.eps_for(L),
         "inner_radius": inner_radius}
    m.update(kw)
    return m


def estimate_q(profile: ThornProfile, L: float, clipped: bool, cfg: SimConfig,
               inner_radius: float = DEFAULT_INNER_RADIUS, two_sided: bool = True,
               couple_theta: Optional[float] = None) -> Estimate:
    """P(reach |p| = L before the axis-z thorn), from the origin.

    With ``clipped`` the thorn is cut at radius L/2.  ``couple_theta`` runs
    the walk with the rotated thorn present as a soft component, so the
    trajectories coincide with those of :func:`estimate_q2` at that angle.
    """
    thetas = [] if couple_theta is None else [couple_theta]
    res = thorn_walk(profile, L, thetas, clipped, cfg, inner_radius, two_sided)
    ind = res.escaped([0])
    return Estimate.bernoulli(ind, cfg.seed, _meta(profile, L, clipped, cfg, inner_radius,
                                                   quantity="q"), res.flags())


def estimate_q2(profile: ThornProfile, L: float, theta: float, clipped: bool, cfg: SimConfig,
                inner_radius: float = DEFAULT_INNER_RADIUS, two_sided: bool = True) -> Estimate:
    """P(reach |p| = L before the axis-z thorn and the thorn with axis (sin t, 0, cos t)).

    ``meta['q']`` carries the single-thorn estimate from the same paths and
    ``meta['violations']`` the number of paths escaping both but not one
    (zero by construction).
    """
    if not 0.0 < theta <= math.pi:
        raise DomainError("theta must lie in (0, pi]")
    res = thorn_walk(profile, L, [theta], clipped, cfg, inner_radius, two_sided)
    ind1 = res.escaped([0])
    ind2 = res.escaped([0, 1])
    q = Estimate.bernoulli(ind1, cfg.seed)
    meta = _meta(profile, L, clipped, cfg, inner_radius, theta=theta, quantity="q2",
                 q=q.mean, q_stderr=q.stderr, violations=int(np.sum(ind2 & ~ind1)))
    return Estimate.bernoulli(ind2, cfg.seed, meta, res.flags())


def coupled_q(profile, L, theta, clipped, cfg, inner_radius=DEFAULT_INNER_RADIUS,
              two_sided=True) -> tuple:
    """Per-path indicators (escape one thorn, escape both) from one walk."""
    res = thorn_walk(profile, L, [theta], clipped, cfg, inner_radius, two_sided)
    return res.escaped([0]), res.escaped([0, 1])


def _ratio_estimate(y1, y2, seed, meta, flags, min_signal=10.0) -> Estimate:
    n = y1.size
    m1 = float(np.mean(y1))
    m2 = float(np.mean(y2))
    se1 = math.sqrt(max(m1 * (1 - m1), 0.0) / n)
    if not m1 > min_signal * se1 or m1 == 0:
        raise InsufficientSignal(
            f"q estimate {m1:.3g} is within {min_signal:g} standard errors of zero; increase n_paths")
    u = m2 / m1**2
    psi = (y2 - m2) / m1**2 - 2.0 * m2 * (y1 - m1) / m1**3
    se = float(np.std(psi, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return Estimate(u, se, n, int(seed), meta, flags)


def estimate_U(profile: ThornProfile, L: float, theta: float, cfg: SimConfig, clipped: bool = False,
               inner_radius: float = DEFAULT_INNER_RADIUS, check_regular: bool = True) -> Estimate:
    """U = q2 / q^2 by the delta method on shared paths.

    If ``check_regular``, U is also estimated at L/4 and ``meta['regular']``
    records whether U(L) >= U(L/4).
    """
    res = thorn_walk(profile, L, [theta], clipped, cfg, inner_radius)
    y1 = res.escaped([0]).astype(float)
    y2 = res.escaped([0, 1]).astype(float)
    meta = _meta(profile, L, clipped, cfg, inner_radius, theta=theta, quantity="U",
                 q=float(y1.mean()), q2=float(y2.mean()))
    est = _ratio_estimate(y1, y2, cfg.seed, meta, res.flags())
    if check_regular:
        quarter = estimate_U(profile, L / 4, theta, cfg, clipped, inner_radius, check_regular=False)
        est.meta["U_quarter"] = quarter.mean
        est.meta["U_quarter_stderr"] = quarter.stderr
        est.meta["regular"] = bool(est.mean >= quarter.mean)
    return est


def q_curve(profile: ThornProfile, L_list: Sequence[float], cfg: SimConfig,
            inner_radius: float = DEFAULT_INNER_RADIUS) -> tuple:
    """Unclipped q(L) for several L from one walk (absorbing spheres are soft but the last).

    Returns the Estimates and the (n, len(L_list)) indicator matrix, which
    is nonincreasing along each row.
    """
    Ls = [float(v) for v in L_list]
    if any(b <= a for a, b in zip(Ls, Ls[1:])):
        raise DomainError("L_list must be increasing")
    thorn = ThornSet(profile, Z_AXIS, inner_radius)
    spheres = [ExitSphere(v) for v in Ls[:-1]]
    dom = Domain(Ls[-1], [thorn] + spheres)
    res = run_wos(dom, cfg.with_(start=(0.0, 0.0, 0.0)), soft=[True] * (1 + len(spheres)),
                  eps=cfg.eps_for(Ls[0]))
    cols = []
    for i, v in enumerate(Ls):
        target = 0 if i == len(Ls) - 1 else dom.outer_offset + 1 + i
        cols.append(res.escaped([0], target=target))
    ind = np.stack(cols, axis=1)
    ests = [Estimate.bernoulli(ind[:, i], cfg.seed, _meta(profile, v, False, cfg, inner_radius,
                                                          quantity="q"), res.flags())
            for i, v in enumerate(Ls)]
    return ests, ind


# occupation and hitting densities ------------------------------------------------

def occupation_density(domain: Domain, x_probe, ball_r: float, cfg: SimConfig,
                       floor: Optional[float] = None) -> Estimate:
    """Expected time spent in the probe ball divided by its volume.

    Under the generator (1/2) Laplacian this estimates the Green function
    averaged over the ball; in free space it is 1 / (2 pi |x - y|).
    """
    x = np.asarray(x_probe, dtype=float)
    if not ball_r > 0:
        raise DomainError("ball_r must be positive")
    obs, profs = domain.lower()
    d = kernels.dist_points(obs, profs, x[None, :])[0]
    if d.size and np.min(d) <= ball_r:
        raise DomainError("probe ball intersects the boundary")
    if np.linalg.norm(x - np.asarray(cfg.start)) <= ball_r:
        raise DomainError("probe ball contains the start point")
    floor = 0.2 * ball_r if floor is None else floor
    res = run_em(domain, cfg, probe=_probe_array(codes.PROBE_BALL, x, ball_r, 0.0, floor))
    vol = 4.0 / 3.0 * math.pi * ball_r**3
    est = Estimate.sample_mean(res.occ / vol, cfg.seed,
                               {"probe": x.tolist(), "ball_r": ball_r, "L": domain.L,
                                "dt_factor": cfg.dt_factor}, res.flags())
    return est


def occupation_band(domain: Domain, r1: float, r2: float, cfg: SimConfig,
                    floor: Optional[float] = None) -> Estimate:
    """Expected time spent in the radial band r1 <= |p - centre| <= r2."""
    if not 0 <= r1 < r2:
        raise DomainError("need 0 <= r1 < r2")
    # steps inside the band stay at most dt_factor times its width; the
    # trapezoid occupation rule is unbiased enough at that resolution
    floor = (r2 - r1) if floor is None else floor
    res = run_em(domain, cfg, probe=_probe_array(codes.PROBE_BAND, domain.center, r1, r2, floor))
    return Estimate.sample_mean(res.occ, cfg.seed, {"band": [r1, r2], "L": domain.L,
                                                    "dt_factor": cfg.dt_factor}, res.flags())


def hitting_density_polar(domain: Domain, n_bins: int, cfg: SimConfig, fold: bool = True) -> dict:
    """Density of escape points over the polar angle, relative to uniform.

    Bins have equal area.  With ``fold`` the angle is folded onto [0, pi/2]
    by t -> min(t, pi - t), natural for two-sided thorns.  Density 1 in
    every bin means the escape points are uniform on the sphere and every
    path escapes.
    """
    if n_bins < 2:
        raise DomainError("need at least 2 bins")
    res = run_wos(domain, cfg)
    esc = res.escaped()
    p = res.exitp[esc] - np.asarray(domain.center)
    cth = np.clip(p[:, 2] / np.linalg.norm(p, axis=1), -1.0, 1.0)
    if fold:
        u = 1.0 - np.abs(cth)  # uniform on [0, 1] for uniform points
        edges_c = np.linspace(1.0, 0.0, n_bins + 1)
        theta_edges = np.arccos(edges_c)
    else:
        u = (1.0 - cth) / 2.0
        theta_edges = np.arccos(np.linspace(1.0, -1.0, n_bins + 1))
    idx = np.minimum((u * n_bins).astype(np.int64), n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    n = res.n
    frac = counts / n
    density = frac * n_bins
    stderr = np.sqrt(np.maximum(frac * (1 - frac), 1.0 / n) / n) * n_bins
    return {"theta_edges": theta_edges, "counts": counts, "density": density, "stderr": stderr,
            "n": n, "escaped": int(esc.sum()), "fold": fold, "seed": int(cfg.seed),
            "flags": res.flags()}


def isotonic_check(values, stderr, increasing: bool = True, level: float = 0.99) -> dict:
    """Test the null "the binned values are monotone".

    Fits a weighted isotonic regression and compares the residual chi^2 with
    the ``level`` quantile of chi^2 with n - 1 degrees of freedom.
    """
    y = np.asarray(values, dtype=float)
    se = np.asarray(stderr, dtype=float)
    w = 1.0 / se**2
    fit = isotonic_regression(y, weights=w, increasing=increasing).x
    chi2 = float(np.sum(w * (y - fit) ** 2))
    thr = float(stats.chi2.ppf(level, y.size - 1))
    return {"chi2": chi2, "threshold": thr, "passed": chi2 < thr, "fit": fit}


# cylinder experiments -------------------------------------------------------------

C_CYL_STARTS = ((0.0, 0.0, 0.0), (1.0, 0.0, 1.0), (-1.0, 0.0, 1.0), (1.0, 0.0, -1.0), (-1.0, 0.0, -1.0))


def cyl_escape_mc(b: float, cfg: SimConfig, starts=C_CYL_STARTS, a: float = 1.0,
                  relative: bool = False) -> list:
    """P(|Z| reaches b before the radial part reaches a) from each start.

    The planes are at z = +-b, or at start_z +- b with ``relative``.
    """
    out = []
    for s in starts:
        z0 = s[2] if relative else 0.0
        dom = Domain(math.inf, [InfiniteCylinder((0.0, 0.0, 0.0), (0.0, 0.0, 1.0), a, exterior=True),
                                HalfSpace((0.0, 0.0, 1.0), z0 + b), HalfSpace((0.0, 0.0, -1.0), -(z0 - b))])
        res = run_wos(dom, cfg.with_(start=s), eps=cfg.eps_for(a), validate=False)
        ind = (res.term == 1) | (res.term == 2)
        out.append(Estimate.bernoulli(ind, cfg.seed, {"start": list(s), "a": a, "b": b,
                                                      "relative": relative}, res.flags()))
    return out


def estimate_c_cyl(cfg: SimConfig, starts=C_CYL_STARTS) -> Estimate:
    """c_cyl = sqrt(c'), c' the worst-start probability of leaving through the caps first.

    The cylinder has radius 1 and the caps sit at distance 1 above and below
    each start.
    """
    per = cyl_escape_mc(1.0, cfg, starts, relative=True)
    k = int(np.argmax([e.mean for e in per]))
    cp = per[k]
    c = math.sqrt(cp.mean)
    se = cp.stderr / (2 * c) if c > 0 else 0.0
    meta = {"c_prime": cp.mean, "c_prime_stderr": cp.stderr, "worst_start": list(starts[k]),
            "per_start": [e.mean for e in per]}
    return Estimate(c, se, cp.n, int(cfg.seed), meta, cp.flags)


def radial_hit_mc(v1: float, v2: float, v3: float, cfg: SimConfig) -> Estimate:
    """P(the distance to the z axis reaches v1 before v3) from distance v2, by WoS.

    The domain is the shell v1 < r < v3 between two infinite coaxial
    cylinders; the z coordinate plays no role.
    """
    if not 0 < v1 < v2 < v3:
        raise DomainError("need 0 < v1 < v2 < v3")
    dom = Domain(math.inf, [InfiniteCylinder((0.0, 0.0, 0.0), (0.0, 0.0, 1.0), v1),
                            InfiniteCylinder((0.0, 0.0, 0.0), (0.0, 0.0, 1.0), v3, exterior=True)])
    eps = cfg.eps_for(v3)
    res = run_wos(dom, cfg.with_(start=(v2, 0.0, 0.0)), eps=eps)
    return Estimate.bernoulli(res.term == 0, cfg.seed, {"v": [v1, v2, v3], "eps": eps, "engine": "wos"},
                              res.flags())


CONVERSE_AXIS = ((0.0, 0.0, 0.5), (0.0, 0.0, 0.75))
CONVERSE_STARTS = ((0.5, 0.0, 0.0), (0.0, 0.0, -0.5))


def cylinder_avoid_curve(radii: Sequence[float], cfg: SimConfig, starts=CONVERSE_STARTS) -> dict:
    """Avoidance probabilities of thin cylinders about the segment from (0,0,1/2) to (0,0,3/4).

    All radii share one walk per start (nested soft cylinders inside the
    unit ball), so the estimates are pathwise monotone in r.  The shell is
    ``min(eps, 0.01 * min(radii))`` so it stays far below every radius.
    """
    rs = [float(r) for r in radii]
    if any(not 0 < r < 0.1 for r in rs):
        raise DomainError("radii must lie in (0, 0.1)")
    order = np.argsort(rs)[::-1]
    cyls = [CylinderSegment(CONVERSE_AXIS[0], CONVERSE_AXIS[1], rs[i]) for i in order]
    dom = Domain(1.0, cyls)
    eps = min(cfg.eps_for(1.0), 0.01 * min(rs))
    out = {"radii": rs, "eps": eps, "starts": [list(s) for s in starts], "estimates": {}}
    for s in starts:
        res = run_wos(dom, cfg.with_(start=s), soft=[True] * len(cyls), eps=eps)
        ests = [None] * len(rs)
        for pos, i in enumerate(order):
            ind = res.escaped([pos])
            ests[i] = Estimate.bernoulli(ind, cfg.seed, {"r": rs[i], "start": list(s), "eps": eps},
                                         res.flags())
        out["estimates"][tuple(s)] = ests
    return out


def cylinder_avoid_prob(r: float, cfg: SimConfig, starts=CONVERSE_STARTS) -> list:
    """Avoidance probability of one thin cylinder, one Estimate per start."""
    cur = cylinder_avoid_curve([r], cfg, starts)
    return [cur["estimates"][tuple(s)][0] for s in starts]
