"""Closed-form hitting laws and deterministic evaluators of explicit bounds.

Every function here is pure.  Constants with no constructive value are
carried in :class:`BoundParams`; the evaluators are exact given them.
Large ladder quantities are returned as logarithms because ``r_k`` leaves
the double range quickly.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Optional

import numpy as np

from .errors import DomainError, SingularInputError
from .profiles import ThornProfile, log_g_integral

# worst-start estimate of sqrt(c') from estimate_c_cyl with 10^5 paths
# (c' = 0.2796 +- 0.0014); a Bessel-series computation gives c' ~ 0.28 too
DEFAULT_C_CYL = 0.5288


@dataclass(frozen=True)
class BoundParams:
    """User-supplied constants of the bounds.

    ``alpha > beta > 2`` and ``gamma`` in (0, 1) parametrize the scale
    ladder; ``k0`` is its first index.
    """

    c_cyl: float = DEFAULT_C_CYL
    c_q: float = 1.0
    M: float = 1.0
    zeta: float = 1.0
    K1: float = 1.0
    b_R: float = 1.0
    c_f: float = 1.0
    r_f: float = 1.0
    R_f: float = 1.0
    c_star: float = 1.0
    c_tilde: float = 4.0
    alpha: float = 3.0
    beta: float = 2.5
    gamma: float = 0.5
    k0: int = 3

    def __post_init__(self):
        if not 0.0 < self.c_cyl < 1.0:
            raise DomainError("c_cyl must lie in (0, 1)")

    def with_(self, **kw) -> "BoundParams":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, rec: dict) -> "BoundParams":
        known = set(cls.__dataclass_fields__)
        bad = set(rec) - known
        if bad:
            raise DomainError(f"unknown bound parameters: {sorted(bad)}")
        return cls(**rec)

    def check_ladder(self) -> None:
        """Raise unless the ladder constraints hold."""
        if not self.alpha > self.beta > 2.0:
            raise DomainError("ladder needs alpha > beta > 2")
        if not 0.0 < self.gamma < 1.0:
            raise DomainError("gamma must lie in (0, 1)")
        if self.c_tilde * math.log(self.c_cyl) > -2.0:
            raise DomainError(
                f"c_tilde * log(c_cyl) = {self.c_tilde * math.log(self.c_cyl):.4g} exceeds -2")
        if self.k0 < 3:
            raise DomainError("k0 must be at least 3")


# hitting laws ------------------------------------------------------------------

def radial_hit_prob(v1: float, v2: float, v3: float) -> float:
    """P(planar radius reaches v1 before v3) from radius v2."""
    if not (0.0 < v1 <= v2 <= v3 and v1 < v3):
        raise DomainError("need 0 < v1 <= v2 <= v3 and v1 < v3")
    return (math.log(v3) - math.log(v2)) / (math.log(v3) - math.log(v1))


def sphere_escape_prob(a: float, r: float, b: float) -> float:
    """P(3-D Brownian motion from radius r reaches radius b before radius a)."""
    if not (0.0 < a <= r <= b and a < b):
        raise DomainError("need 0 < a <= r <= b and a < b")
    return (1.0 / a - 1.0 / r) / (1.0 / a - 1.0 / b)


def sphere_escape_grad(a: float, r: float, b: float) -> float:
    """Radial derivative of :func:`sphere_escape_prob` in r."""
    if not (0.0 < a <= r <= b and a < b):
        raise DomainError("need 0 < a <= r <= b and a < b")
    return (1.0 / r**2) / (1.0 / a - 1.0 / b)


def cyl_escape_bound(params: BoundParams, a: float, b: float) -> float:
    """c_cyl^(b/a): bound on leaving the slab |z| < b before the radius reaches a."""
    if not (a > 0 and b >= 2 * a):
        raise DomainError("need b >= 2a > 0")
    return params.c_cyl ** (b / a)


def free_green(x, y) -> float:
    """Occupation density 1 / (2 pi |x - y|) of 3-D Brownian motion with generator Laplacian / 2."""
    d = float(np.linalg.norm(np.subtract(x, y, dtype=float)))
    if d == 0.0:
        raise SingularInputError("free_green is singular at x = y")
    return 1.0 / (2.0 * math.pi * d)


# scale ladder ----------------------------------------------------------------------

@dataclass(frozen=True)
class LadderStep:
    """Ladder quantities at index k, as natural logs plus floats (None on overflow)."""

    k: int
    m: float
    log_r: float
    log_q: float
    log_a: float
    log_rho: float
    log_b: float
    log_d: float

    def to_dict(self) -> dict:
        out = {"k": self.k, "m": self.m}
        for name in ("r", "q", "a", "rho", "b", "d"):
            lv = getattr(self, "log_" + name)
            out["log_" + name] = lv
            out[name] = math.exp(lv) if lv < 709.0 else None
        return out


def _m(alpha: float, k: float) -> float:
    return k * math.log(k) ** alpha


def ladder(params: BoundParams, k: int) -> LadderStep:
    """m_k, r_k = e^m_k and the derived radii q_k, a_k, rho_k, b_k, d_k."""
    if k < 3:
        raise DomainError("ladder index must be >= 3")
    params.check_ladder()
    lk = math.log(k)
    lct = math.log(params.c_tilde)
    m = _m(params.alpha, k)
    log_r = m
    log_a = log_r + math.log(k) + params.beta * math.log(lk)
    return LadderStep(
        k=int(k), m=m, log_r=log_r,
        log_q=log_r - lct - math.log(lk),
        log_a=log_a,
        log_rho=lct + log_a + math.log(lk),
        log_b=_m(params.alpha, k + 1) - lct - math.log(lk),
        log_d=log_r + lct + math.log(lk),
    )


def j_of_L(params: BoundParams, log_L: float) -> int:
    """Smallest j with r_{j-1} >= L (with r indexed from k0)."""
    j = params.k0 + 1
    while _m(params.alpha, j - 1) < log_L:
        j += 1
    return j


def _q_terms(params: BoundParams, k_lo: int, k_hi: int) -> float:
    ks = np.arange(k_lo, k_hi + 1, dtype=float)
    if ks.size == 0:
        return 0.0
    terms = 1.0 / ks + params.alpha / (ks * np.log(ks))
    return float(math.fsum(terms)) / (1.0 - params.gamma)


def qL_lower_bound(params: BoundParams, log_L: float) -> float:
    """log of the lower bound c_q exp(-sum_{k0}^{j(L)} (1/k + alpha/(k log k)) / (1 - gamma)).

    ``log_L`` is log L so that radii beyond the double range are usable.
    """
    params.check_ladder()
    if log_L < _m(params.alpha, params.k0):
        raise DomainError("L must be at least r_{k0}")
    j = j_of_L(params, log_L)
    return math.log(params.c_q) - _q_terms(params, params.k0, j)


def U_upper_bound_power(params: BoundParams, theta: float) -> tuple:
    """M |log t|^(1/(1-gamma)) (log |log t|)^zeta for the power profile z^gamma.

    Returns ``(value, clamped)``; if |log t| <= e the value is M and
    ``clamped`` is True.
    """
    if not 0.0 < theta <= math.pi / 2:
        raise DomainError("theta must lie in (0, pi/2]")
    lt = abs(math.log(theta))
    if lt <= math.e:
        return params.M, True
    return params.M * lt ** (1.0 / (1.0 - params.gamma)) * math.log(lt) ** params.zeta, False


def converse_q_bound(params: BoundParams, k: int, alpha: Optional[float] = None) -> dict:
    """sum_{j<=k} log(1 - K1/(alpha sqrt j)) and the comparison -sum K1/(alpha sqrt j).

    ``alpha`` is the exponent of g(z) = exp(alpha log^(1/2) z) and
    defaults to ``params.alpha``.
    """
    if k < 0:
        raise DomainError("k must be >= 0")
    alpha = params.alpha if alpha is None else alpha
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    js = np.arange(1, k + 1, dtype=float)
    x = params.K1 / (alpha * np.sqrt(js))
    if np.any(x >= 1.0):
        raise DomainError("K1 / alpha too large: a factor 1 - K1/(alpha sqrt j) is not positive")
    log_bound = float(math.fsum(np.log1p(-x)))
    comparison = -float(math.fsum(x))
    return {"k": int(k), "log_bound": log_bound, "comparison": comparison,
            "asymptotic": -2.0 * params.K1 / alpha * math.sqrt(k)}


def u_theta_solution(params: BoundParams, profile: ThornProfile, theta: float, R: float,
                     L: float) -> float:
    """b_R exp(c_f (1 + |log t|) int_R^L ds / (s log^2 g(s)))."""
    if not 0.0 < theta <= math.pi:
        raise DomainError("theta must lie in (0, pi]")
    if R < params.R_f:
        raise DomainError("R must be at least R_f")
    if L < R:
        raise DomainError("need L >= R")
    if not float(profile.log_g_of_u(math.log(R))) > 0:
        raise DomainError("need g(R) > 1")
    I = log_g_integral(profile, math.log(R), math.log(L)) if L > R else 0.0
    return params.b_R * math.exp(params.c_f * (1.0 + abs(math.log(theta))) * I)


def k1_small(params: BoundParams, theta: float) -> float:
    """exp(|log t|^(1/(alpha-1))), the switch index used with the small-k estimate."""
    if not 0.0 < theta < 1.0:
        raise DomainError("theta must lie in (0, 1)")
    return math.exp(abs(math.log(theta)) ** (1.0 / (params.alpha - 1.0)))


def k1_large(theta: float) -> int:
    """ceil(log(1/t)), the switch index used with the large-k estimate."""
    if not 0.0 < theta < 1.0:
        raise DomainError("theta must lie in (0, 1)")
    return int(math.ceil(math.log(1.0 / theta)))
