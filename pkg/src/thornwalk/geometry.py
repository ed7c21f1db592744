"""Thorn sets, simple obstacles, domains and conservative distance queries.

A thorn about the unit axis ``v`` is the set of points ``p`` with
``|p| >= inner_radius`` whose distance to the axis line is at most
``f(|p . v|)``.  Optional ``clip_radius`` intersects it with a ball about
the origin and ``two_sided=False`` keeps only the ``p . v >= 0`` half.

Distances are lower bounds, which is what walk-on-spheres needs: an
inscribed sphere must never cross the boundary.  For thorns the bound is
computed in the meridian half-plane from the exact distance to the two cap
arcs and the flat base, plus a bisection on the max-norm distance to the
graph ``r = f(z)``, which is within a factor sqrt(2) of the true distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import DomainError, ExtrapolationError
from .kernels import codes
from .profiles import ThornProfile


@dataclass(frozen=True)
class UnitVector:
    x: float
    y: float
    z: float

    def __post_init__(self):
        n = math.sqrt(self.x**2 + self.y**2 + self.z**2)
        if abs(n - 1.0) > 1e-12:
            raise DomainError(f"not a unit vector (norm {n!r})")

    @classmethod
    def normalized(cls, v) -> "UnitVector":
        v = np.asarray(v, dtype=float)
        n = float(np.linalg.norm(v))
        if n == 0:
            raise DomainError("zero vector has no direction")
        v = v / n
        return cls(float(v[0]), float(v[1]), float(v[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


Z_AXIS = UnitVector(0.0, 0.0, 1.0)


def polar_axis(theta: float) -> UnitVector:
    """The unit vector (sin t, 0, cos t)."""
    s, c = math.sin(theta), math.cos(theta)
    n = math.hypot(s, c)
    return UnitVector(s / n, 0.0, c / n)


@dataclass(frozen=True)
class ThornSet:
    """A truncated, optionally clipped thorn anchored at the origin."""

    profile: ThornProfile
    axis: UnitVector = Z_AXIS
    inner_radius: float = 1.0
    clip_radius: Optional[float] = None
    two_sided: bool = True

    def __post_init__(self):
        if not self.inner_radius > 0:
            raise DomainError("inner_radius must be positive")
        if self.clip_radius is not None and not self.clip_radius > 0:
            raise DomainError("clip_radius must be positive")

    def clipped(self, rho: float) -> "ThornSet":
        return ThornSet(self.profile, self.axis, self.inner_radius, rho, self.two_sided)

    def with_axis(self, axis: UnitVector) -> "ThornSet":
        return ThornSet(self.profile, axis, self.inner_radius, self.clip_radius, self.two_sided)

    def to_config(self) -> dict:
        return {
            "type": "thorn",
            "profile": self.profile.to_config(),
            "axis": [self.axis.x, self.axis.y, self.axis.z],
            "inner_radius": self.inner_radius,
            "clip_radius": self.clip_radius,
            "two_sided": self.two_sided,
        }


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError("ball radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def to_config(self) -> dict:
        return {"type": "ball", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class CylinderSegment:
    """Solid cylinder of the given radius around the segment [axis_a, axis_b]."""

    axis_a: tuple
    axis_b: tuple
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError("cylinder radius must be positive")
        a = tuple(float(c) for c in self.axis_a)
        b = tuple(float(c) for c in self.axis_b)
        if a == b:
            raise DomainError("cylinder axis segment is degenerate")
        object.__setattr__(self, "axis_a", a)
        object.__setattr__(self, "axis_b", b)

    def to_config(self) -> dict:
        return {"type": "cylseg", "axis_a": list(self.axis_a), "axis_b": list(self.axis_b),
                "radius": self.radius}


@dataclass(frozen=True)
class HalfSpace:
    """The closed half-space {p : normal . p >= offset}."""

    normal: tuple
    offset: float

    def __post_init__(self):
        n = UnitVector.normalized(self.normal)
        object.__setattr__(self, "normal", (n.x, n.y, n.z))

    def to_config(self) -> dict:
        return {"type": "halfspace", "normal": list(self.normal), "offset": self.offset}


@dataclass(frozen=True)
class InfiniteCylinder:
    """Solid infinite cylinder (or, with ``exterior=True``, its complement's closure)."""

    point: tuple
    direction: tuple
    radius: float
    exterior: bool = False

    def __post_init__(self):
        d = UnitVector.normalized(self.direction)
        object.__setattr__(self, "direction", (d.x, d.y, d.z))
        object.__setattr__(self, "point", tuple(float(c) for c in self.point))

    def to_config(self) -> dict:
        return {"type": "cylinder", "point": list(self.point), "direction": list(self.direction),
                "radius": self.radius, "exterior": self.exterior}


@dataclass(frozen=True)
class ExitSphere:
    """Everything outside the ball of the given radius (an absorbing sphere)."""

    radius: float
    center: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError("sphere radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def to_config(self) -> dict:
        return {"type": "exitsphere", "radius": self.radius, "center": list(self.center)}


def _corner(f, R: float) -> tuple:
    """Smallest z >= 0 with z^2 + f(z)^2 >= R^2 and the polar angle of that corner."""
    f0 = float(f(0.0))
    if f0 >= R:
        return 0.0, math.pi / 2
    lo, hi = 0.0, R
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid * mid + float(f(mid)) ** 2 >= R * R:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 4e-16 * hi:
            break
    z = hi
    return z, math.atan2(float(f(z)), z)


def _thorn_row(t: ThornSet, prof_index: int, clip: float) -> np.ndarray:
    row = codes.empty_row()
    row[codes.C_TYPE] = codes.THORN
    row[codes.C_A:codes.C_A + 3] = t.axis.as_array()
    R = t.inner_radius
    row[codes.C_RADIUS] = R
    row[codes.C_CLIP] = clip
    row[codes.C_TWO_SIDED] = 1.0 if t.two_sided else 0.0
    row[codes.C_PROF] = prof_index
    prof = t.profile
    if clip > prof.z_max:
        raise ExtrapolationError(
            f"tabulated profile ends at z={prof.z_max}, but the thorn reaches radius {clip}")
    f = prof.f
    row[codes.C_F0] = float(f(0.0))
    if clip > R:
        za, phia = _corner(f, R)
        row[codes.C_ZA] = za
        row[codes.C_PHIA] = phia
        if math.isinf(clip):
            row[codes.C_ZB] = math.inf
            row[codes.C_PHIB] = 0.0
        else:
            zb, phib = _corner(f, clip)
            row[codes.C_ZB] = zb
            row[codes.C_PHIB] = phib
    return row


def _profile_table(profiles: Sequence[ThornProfile]) -> np.ndarray:
    rows = [p.to_array() for p in profiles] or [ThornProfile().to_array()]
    width = max(r.size for r in rows)
    table = np.zeros((len(rows), width))
    for i, r in enumerate(rows):
        table[i, :r.size] = r
    return table


def lower(obstacles: Sequence, outer_L: float = math.inf, center=(0.0, 0.0, 0.0),
          soft: Sequence[bool] = ()) -> tuple:
    """Lower shapes to the kernel tables ``(obs, profs)``.

    If ``outer_L`` is finite, row 0 is the absorbing outer sphere and the
    obstacles follow.  ``soft[i]`` marks obstacle ``i`` as a soft
    component: walks record a hit bit and pass on.
    """
    rows, profiles = [], []
    if not math.isinf(outer_L):
        row = codes.empty_row()
        row[codes.C_TYPE] = codes.OUTER_SPHERE
        row[codes.C_A:codes.C_A + 3] = center
        row[codes.C_RADIUS] = outer_L
        rows.append(row)
    for i, ob in enumerate(obstacles):
        if isinstance(ob, ThornSet):
            if ob.profile not in profiles:
                profiles.append(ob.profile)
            clip = math.inf if ob.clip_radius is None else ob.clip_radius
            # a walk absorbed on |p| = L can never touch the thorn outside B_L
            clip = min(clip, outer_L + float(np.linalg.norm(center)))
            row = _thorn_row(ob, profiles.index(ob.profile), clip)
        elif isinstance(ob, Ball):
            row = codes.empty_row()
            row[codes.C_TYPE] = codes.BALL
            row[codes.C_A:codes.C_A + 3] = ob.center
            row[codes.C_RADIUS] = ob.radius
        elif isinstance(ob, CylinderSegment):
            row = codes.empty_row()
            row[codes.C_TYPE] = codes.CYLSEG
            row[codes.C_A:codes.C_A + 3] = ob.axis_a
            row[codes.C_B:codes.C_B + 3] = ob.axis_b
            row[codes.C_RADIUS] = ob.radius
            row[codes.C_SEGLEN] = float(np.linalg.norm(np.subtract(ob.axis_b, ob.axis_a)))
        elif isinstance(ob, ExitSphere):
            row = codes.empty_row()
            row[codes.C_TYPE] = codes.OUTER_SPHERE
            row[codes.C_A:codes.C_A + 3] = ob.center
            row[codes.C_RADIUS] = ob.radius
        elif isinstance(ob, HalfSpace):
            row = codes.empty_row()
            row[codes.C_TYPE] = codes.HALFSPACE
            row[codes.C_A:codes.C_A + 3] = ob.normal
            row[codes.C_RADIUS] = ob.offset
        elif isinstance(ob, InfiniteCylinder):
            row = codes.empty_row()
            row[codes.C_TYPE] = codes.CYL_OUTER if ob.exterior else codes.CYL_INNER
            row[codes.C_A:codes.C_A + 3] = ob.point
            row[codes.C_B:codes.C_B + 3] = ob.direction
            row[codes.C_RADIUS] = ob.radius
        else:
            raise DomainError(f"unsupported obstacle type {type(ob).__name__}")
        if i < len(soft) and soft[i]:
            row[codes.C_TERMINAL] = 0.0
        rows.append(row)
    if len(rows) > 62:
        raise DomainError("at most 62 boundary components are supported")
    return np.ascontiguousarray(np.array(rows).reshape(-1, codes.ROW_WIDTH)), _profile_table(profiles)


@dataclass
class Domain:
    """Ball of radius ``L`` about ``center`` minus the obstacles."""

    L: float
    obstacles: list = field(default_factory=list)
    center: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.L > 0:
            raise DomainError("L must be positive")
        self.obstacles = list(self.obstacles)
        self.center = tuple(float(c) for c in self.center)

    @property
    def has_outer(self) -> bool:
        return not math.isinf(self.L)

    @property
    def outer_offset(self) -> int:
        """Kernel index of obstacle 0."""
        return 1 if self.has_outer else 0

    def lower(self, soft: Sequence[bool] = ()) -> tuple:
        return lower(self.obstacles, self.L, self.center, soft)

    def to_config(self) -> dict:
        return {"L": self.L, "center": list(self.center),
                "obstacles": [ob.to_config() for ob in self.obstacles]}


def _pts(p) -> np.ndarray:
    a = np.ascontiguousarray(np.asarray(p, dtype=float).reshape(-1, 3))
    return a


def make_rotated_thorn(profile: ThornProfile, theta: float, **kw) -> ThornSet:
    """Thorn with axis (sin theta, 0, cos theta)."""
    if not 0.0 <= theta <= math.pi:
        raise DomainError("theta must lie in [0, pi]")
    return ThornSet(profile, polar_axis(theta), **kw)


def contains(obj, p) -> bool:
    """Membership of a point (array of points gives an array)."""
    pts = _pts(p)
    obs, profs = lower([obj])
    out = kernels.contains_points(obs, profs, pts)[:, 0]
    return bool(out[0]) if np.ndim(p) == 1 else out


def distance_lower_bound(obj, p):
    """Lower bound on the Euclidean distance from ``p`` to the set (0 inside)."""
    pts = _pts(p)
    obs, profs = lower([obj])
    d = np.maximum(kernels.dist_points(obs, profs, pts)[:, 0], 0.0)
    return float(d[0]) if np.ndim(p) == 1 else d


def domain_distance(domain: Domain, p) -> float:
    """min(L - |p - center|, obstacle distance bounds); errors outside the open domain."""
    pts = _pts(p)
    if pts.shape[0] != 1:
        raise DomainError("domain_distance takes a single point")
    obs, profs = domain.lower()
    inside = kernels.contains_points(obs, profs, pts)[0]
    d = kernels.dist_points(obs, profs, pts)[0]
    off = domain.outer_offset
    if domain.has_outer and d[0] <= 0:
        raise DomainError("point lies outside the outer ball")
    if np.any(inside[off:]):
        raise DomainError("point lies inside an obstacle")
    return float(np.min(d)) if d.size else math.inf


def check_start(domain: Domain, start) -> None:
    domain_distance(domain, start)


def path_hits(obj, polyline, guard: float = 0.0) -> bool:
    """Conservative hit test of a polyline against a set.

    True if a vertex is inside, or if a midpoint recursion on some segment
    (depth <= 20, recursion stops once the two end distances exceed the
    piece length) finds a point within ``guard`` of the set.  Undecided
    pieces at full depth count as hits.
    """
    verts = _pts(polyline)
    if verts.shape[0] == 0:
        raise DomainError("polyline is empty")
    obs, profs = lower([obj])
    if isinstance(obj, ThornSet):
        return bool(kernels.polyline_hits_thorn(obs[0], profs, verts, float(guard)))
    inside = kernels.contains_points(obs, profs, verts)[:, 0]
    if np.any(inside):
        return True

    def dist(q):
        return float(kernels.dist_points(obs, profs, _pts(q))[0, 0])

    if verts.shape[0] == 1:
        return dist(verts[0]) <= guard
    for a, b in zip(verts[:-1], verts[1:]):
        ln = float(np.linalg.norm(b - a))
        stack = [(0.0, 1.0, dist(a), dist(b), 0)]
        if stack[0][2] <= guard or stack[0][3] <= guard:
            return True
        while stack:
            t0, t1, d0, d1, dep = stack.pop()
            if d0 + d1 > (t1 - t0) * ln:
                continue
            if dep >= 20:
                return True
            tm = 0.5 * (t0 + t1)
            dm = dist(a + tm * (b - a))
            if dm <= guard:
                return True
            stack.append((t0, tm, d0, dm, dep + 1))
            stack.append((tm, t1, dm, d1, dep + 1))
    return False


def obstacle_from_config(rec: dict):
    """Inverse of the ``to_config`` records."""
    typ = rec.get("type")
    if typ == "thorn":
        prof = ThornProfile.from_config(rec["profile"])
        axis = UnitVector.normalized(rec.get("axis", [0, 0, 1]))
        return ThornSet(prof, axis, rec.get("inner_radius", 1.0), rec.get("clip_radius"),
                        rec.get("two_sided", True))
    if typ == "ball":
        return Ball(tuple(rec["center"]), rec["radius"])
    if typ == "cylseg":
        return CylinderSegment(tuple(rec["axis_a"]), tuple(rec["axis_b"]), rec["radius"])
    if typ == "exitsphere":
        return ExitSphere(rec["radius"], tuple(rec.get("center", (0.0, 0.0, 0.0))))
    if typ == "halfspace":
        return HalfSpace(tuple(rec["normal"]), rec["offset"])
    if typ == "cylinder":
        return InfiniteCylinder(tuple(rec["point"]), tuple(rec["direction"]), rec["radius"],
                                rec.get("exterior", False))
    raise DomainError(f"unknown obstacle type {typ!r}")


def domain_from_config(rec: dict) -> Domain:
    return Domain(rec["L"], [obstacle_from_config(o) for o in rec.get("obstacles", [])],
                  tuple(rec.get("center", (0.0, 0.0, 0.0))))
