"""Thorn profile functions.

A profile is the radius function ``f`` of a body of revolution: the thorn
about an axis ``v`` is the set of points whose distance to the axis is at
most ``f`` of their coordinate along it.  Three families are supported:

* ``power``: ``f(z) = z**alpha``
* ``subexp``: ``f(z) = z / exp(c * log(z)**p)``
* ``tabulated``: monotone piecewise-linear interpolation in log-log
  coordinates through user-supplied ``(z_i, f_i)`` points.

Below ``z_floor`` every profile is frozen at ``f(z_floor)``.  The gap ratio
is ``g(z) = z / f(z)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate

from .errors import DomainError, ExtrapolationError
from .kernels import codes

FAMILIES = ("power", "subexp", "tabulated")


@dataclass(frozen=True)
class ThornProfile:
    """Radius function of a thorn.

    Parameters
    ----------
    family : {"power", "subexp", "tabulated"}
    alpha : float
        Exponent of the power family, in [0, 1).
    c, p : float
        Parameters of the subexp family.
    z_table, f_table : tuple of float
        Grid of the tabulated family, ``z`` strictly increasing.
    z_floor : float
        Below this value f is frozen.
    """

    family: str = "power"
    alpha: float = 0.0
    c: float = 1.0
    p: float = 0.5
    z_table: tuple = field(default=(), repr=False)
    f_table: tuple = field(default=(), repr=False)
    z_floor: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown profile family {self.family!r}")
        if not self.z_floor > 0:
            raise DomainError("z_floor must be positive")
        if self.family == "power" and not 0.0 <= self.alpha < 1.0:
            raise DomainError("power exponent must lie in [0, 1)")
        if self.family == "subexp":
            if self.z_floor < 1.0:
                raise DomainError("subexp profiles need z_floor >= 1 (log z must be nonnegative)")
            if self.c < 0 or self.p <= 0:
                raise DomainError("subexp needs c >= 0 and p > 0")
        if self.family == "tabulated":
            z = np.asarray(self.z_table, dtype=float)
            f = np.asarray(self.f_table, dtype=float)
            if z.ndim != 1 or z.size < 2 or z.shape != f.shape:
                raise DomainError("tabulated profile needs two equal-length columns with >= 2 rows")
            if np.any(np.diff(z) <= 0) or z[0] <= 0:
                raise DomainError("tabulated z values must be positive and strictly increasing")
            if np.any(f <= 0):
                raise DomainError("tabulated f values must be positive")
            object.__setattr__(self, "z_table", tuple(float(v) for v in z))
            object.__setattr__(self, "f_table", tuple(float(v) for v in f))

    # construction helpers
    @classmethod
    def power(cls, alpha: float, z_floor: float = 1.0) -> "ThornProfile":
        return cls("power", alpha=float(alpha), z_floor=z_floor)

    @classmethod
    def subexp(cls, c: float, p: float, z_floor: float = 1.0) -> "ThornProfile":
        return cls("subexp", c=float(c), p=float(p), z_floor=z_floor)

    @classmethod
    def tabulated(cls, z, f, z_floor: Optional[float] = None) -> "ThornProfile":
        z = tuple(float(v) for v in z)
        if z_floor is None:
            z_floor = z[0] if z else 1.0
        return cls("tabulated", z_table=z, f_table=tuple(float(v) for v in f), z_floor=z_floor)

    @classmethod
    def from_config(cls, cfg: dict) -> "ThornProfile":
        """Build from a record ``{family, alpha | c, p | table_path, z_floor}``."""
        fam = cfg.get("family", "power")
        zf = cfg.get("z_floor")
        if fam == "power":
            return cls.power(cfg.get("alpha", 0.0), 1.0 if zf is None else zf)
        if fam == "subexp":
            return cls.subexp(cfg.get("c", 1.0), cfg.get("p", 0.5), 1.0 if zf is None else zf)
        if fam == "tabulated":
            if "table_path" in cfg:
                z, f = load_table(cfg["table_path"])
            else:
                z, f = cfg["z"], cfg["f"]
            return cls.tabulated(z, f, zf)
        raise DomainError(f"unknown profile family {fam!r}")

    def to_config(self) -> dict:
        out = {"family": self.family, "z_floor": self.z_floor}
        if self.family == "power":
            out["alpha"] = self.alpha
        elif self.family == "subexp":
            out.update(c=self.c, p=self.p)
        else:
            out.update(z=list(self.z_table), f=list(self.f_table))
        return out

    @property
    def label(self) -> str:
        if self.family == "power":
            return f"power(alpha={self.alpha:g})"
        if self.family == "subexp":
            return f"subexp(c={self.c:g},p={self.p:g})"
        return f"tabulated(n={len(self.z_table)})"

    @property
    def z_max(self) -> float:
        """Largest z where f is defined."""
        return self.z_table[-1] if self.family == "tabulated" else math.inf

    @property
    def dip_end(self) -> float:
        """z beyond which f is nondecreasing (a subexp f can dip right after z_floor)."""
        if self.family != "subexp" or self.c == 0 or self.p >= 1:
            return 0.0
        # d/du (u - c u^p) >= 0  <=>  u >= (c p)^(1/(1-p))
        return max(math.exp((self.c * self.p) ** (1.0 / (1.0 - self.p))), self.z_floor)

    # evaluation
    def log_f_of_u(self, u):
        """log f(e^u), vectorised; the frozen region is handled."""
        u = np.maximum(np.asarray(u, dtype=float), math.log(self.z_floor))
        if self.family == "power":
            return self.alpha * u
        if self.family == "subexp":
            return u - self.c * np.power(u, self.p)
        lz = np.log(self.z_table)
        if np.any(u > lz[-1] + 1e-12) or np.any(u < lz[0] - 1e-12):
            raise ExtrapolationError(
                f"tabulated profile evaluated outside its grid [{self.z_table[0]}, {self.z_table[-1]}]"
            )
        return np.interp(u, lz, np.log(self.f_table))

    def f(self, z):
        """Profile value; vectorised over ``z``."""
        z = np.asarray(z, dtype=float)
        if np.any(z < 0):
            raise DomainError("profile evaluated at negative z")
        zz = np.maximum(z, self.z_floor)
        if self.family == "power":
            return zz**self.alpha
        return np.exp(self.log_f_of_u(np.log(zz)))

    def g(self, z):
        z = np.asarray(z, dtype=float)
        return z / self.f(z)

    def log_g_of_u(self, u):
        return np.asarray(u, dtype=float) - self.log_f_of_u(u)

    def to_array(self) -> np.ndarray:
        """Lower to the flat kernel encoding."""
        n = len(self.z_table)
        row = np.zeros(codes.P_TAB + 2 * max(n, 1))
        row[codes.P_ZFLOOR] = self.z_floor
        if self.family == "power":
            row[codes.P_FAMILY] = codes.FAM_POWER
            row[codes.P_A1] = self.alpha
        elif self.family == "subexp":
            row[codes.P_FAMILY] = codes.FAM_SUBEXP
            row[codes.P_A1] = self.c
            row[codes.P_A2] = self.p
            row[codes.P_ZMONO] = self.dip_end
        else:
            row[codes.P_FAMILY] = codes.FAM_TABLE
            row[codes.P_NTAB] = n
            row[codes.P_TAB:codes.P_TAB + n] = np.log(self.z_table)
            row[codes.P_TAB + n:codes.P_TAB + 2 * n] = np.log(self.f_table)
        return row


def load_table(path) -> tuple:
    """Read a two-column CSV ``z,f`` (an optional header row is skipped)."""
    zs, fs = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                z, f = float(row[0]), float(row[1])
            except ValueError:
                if zs:
                    raise
                continue
            zs.append(z)
            fs.append(f)
    return zs, fs


def eval_f(profile: ThornProfile, z):
    if np.any(np.asarray(z) < 0):
        raise DomainError("z must be nonnegative")
    out = profile.f(z)
    return float(out) if np.ndim(out) == 0 else out


def eval_g(profile: ThornProfile, z):
    if np.any(np.asarray(z) < profile.z_floor):
        raise DomainError("g is only defined for z >= z_floor")
    out = profile.g(z)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class HypothesisReport:
    """Outcome of :func:`check_hypotheses`.

    ``worst_z`` is a witness for the first failing check, None if all pass.
    ``g1_ge_2`` only enters ``ok`` when the check ran in strict mode.
    """

    monotone_f: bool
    monotone_g: bool
    g1_ge_2: bool
    osculating_ok: bool
    worst_z: Optional[float] = None
    g_grows: bool = True
    strict: bool = False
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        base = self.monotone_f and self.monotone_g and self.osculating_ok and self.g_grows
        return base and (self.g1_ge_2 or not self.strict)

    def to_dict(self) -> dict:
        return {
            "monotone_f": self.monotone_f,
            "monotone_g": self.monotone_g,
            "g1_ge_2": self.g1_ge_2,
            "osculating_ok": self.osculating_ok,
            "g_grows": self.g_grows,
            "strict": self.strict,
            "ok": self.ok,
            "worst_z": self.worst_z,
            "failures": list(self.failures),
        }


def _osculating_witness(profile: ThornProfile, zs: np.ndarray, n_circle: int = 64):
    """First grid z whose tangent axis-centred circle leaves the thorn, else None."""
    t = 2 * np.pi * np.arange(n_circle) / n_circle
    for z0 in zs:
        h = z0 * 1e-5
        lo = max(z0 - h, 0.0)
        f0 = float(profile.f(z0))
        try:
            df = float((profile.f(z0 + h) - profile.f(lo)) / (z0 + h - lo))
        except ExtrapolationError:
            df = float((profile.f(z0) - profile.f(lo)) / (z0 - lo))
        zc = z0 + f0 * df
        rad = f0 * math.sqrt(1.0 + df * df)
        cz = zc + rad * np.cos(t)
        cx = np.abs(rad * np.sin(t))
        try:
            bound = profile.f(np.abs(cz))
        except ExtrapolationError:
            keep = np.abs(cz) <= profile.z_max
            cz, cx = cz[keep], cx[keep]
            bound = profile.f(np.abs(cz))
        if np.any(cx > bound * (1 + 1e-9)):
            return float(z0)
    return None


def check_hypotheses(profile: ThornProfile, z_lo: float, z_hi: float, n: int = 64,
                     strict: bool = False) -> HypothesisReport:
    """Sampled check of the regularity hypotheses on a geometric grid.

    Checks that f and g are nondecreasing, that g grows across the range,
    that g(1) >= 2 and that the circle centred on the axis and tangent to
    the graph at each grid point stays inside the thorn.  Never raises on a
    failing profile; the first failing grid point is reported as witness.
    The tangent circle test only sees grid points, so it is a heuristic
    certificate rather than a proof.
    """
    if not (profile.z_floor <= z_lo < z_hi):
        raise DomainError("need z_floor <= z_lo < z_hi")
    if n < 16:
        raise DomainError("need n >= 16 grid points")
    zs = np.geomspace(z_lo, z_hi, n)
    fs = profile.f(zs)
    gs = zs / fs
    failures = []
    witness = None

    def first_drop(vals):
        bad = np.nonzero(np.diff(vals) < 0)[0]
        return None if bad.size == 0 else float(zs[bad[0] + 1])

    wf = first_drop(fs)
    mono_f = wf is None
    if not mono_f:
        failures.append("monotone_f")
        witness = wf
    wg = first_drop(gs)
    mono_g = wg is None
    if not mono_g:
        failures.append("monotone_g")
        witness = wg if witness is None else witness
    g_grows = bool(gs[-1] > gs[0])
    if not g_grows:
        failures.append("g_grows")
        witness = float(z_hi) if witness is None else witness
    try:
        g1 = float(profile.g(1.0)) if profile.z_floor <= 1.0 <= profile.z_max else float("nan")
    except ExtrapolationError:
        g1 = float("nan")
    g1_ok = bool(g1 >= 2.0)
    if strict and not g1_ok:
        failures.append("g1_ge_2")
        witness = 1.0 if witness is None else witness
    wo = _osculating_witness(profile, zs)
    osc_ok = wo is None
    if not osc_ok:
        failures.append("osculating")
        witness = wo if witness is None else witness
    return HypothesisReport(mono_f, mono_g, g1_ok, osc_ok, witness, g_grows, strict, failures)


@dataclass
class IntegralTestResult:
    verdict: str
    tail_exponent: float
    partial: float

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "tail_exponent": self.tail_exponent, "partial": self.partial}


# fitted-exponent thresholds; p == 1 up to rounding counts as divergent
CONVERGE_ABOVE = 1.1
DIVERGE_AT_OR_BELOW = 1.0 + 1e-6


def log_g_integral(profile: ThornProfile, u_lo: float, u_hi: float) -> float:
    """The integral of 1 / log(g(e^u))**2 du over [u_lo, u_hi]."""
    if u_hi <= u_lo:
        return 0.0

    def integrand(u):
        return 1.0 / float(profile.log_g_of_u(u)) ** 2

    val, _ = integrate.quad(integrand, u_lo, u_hi, limit=400, epsabs=0.0, epsrel=1e-10)
    return float(val)


def integral_test(profile: ThornProfile, z_min: float, z_max: float, n: int = 64) -> IntegralTestResult:
    """Classify the avoidance integral of 1/(z log^2 g(z)).

    In ``u = log z`` the integrand is ``1 / log^2 g(e^u)``.  Its decay over
    the last decade of ``z`` is fitted to ``u**-p`` by least squares in
    log-log coordinates; ``p > 1.1`` means convergent, ``p <= 1`` divergent
    and anything in between inconclusive.
    """
    if z_min < profile.z_floor:
        raise DomainError("z_min must be >= z_floor")
    if z_max / z_min < 1e3:
        raise DomainError("need z_max / z_min >= 1e3")
    if n < 8:
        raise DomainError("need n >= 8")
    u_lo, u_hi = math.log(z_min), math.log(z_max)
    grid = np.linspace(u_lo, u_hi, max(n, 256))
    lg = profile.log_g_of_u(grid)
    if np.any(lg <= 0) or not np.all(np.isfinite(lg)):
        raise DomainError("log g must be positive on the whole range")
    partial = log_g_integral(profile, u_lo, u_hi)
    tail = np.linspace(max(u_hi - math.log(10.0), u_lo), u_hi, n)
    w = -2.0 * np.log(profile.log_g_of_u(tail))
    slope = np.polyfit(np.log(tail), w, 1)[0]
    p_fit = float(-slope)
    if p_fit > CONVERGE_ABOVE:
        verdict = "converges"
    elif p_fit <= DIVERGE_AT_OR_BELOW:
        verdict = "diverges"
    else:
        verdict = "inconclusive"
    return IntegralTestResult(verdict, p_fit, partial)
