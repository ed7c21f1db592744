"""numba kernels: distances, walk-on-spheres, adaptive Euler-Maruyama, W_L scans.

Every path draws from its own counter-based stream, so the per-path outputs
do not depend on how ``prange`` schedules the loop.
"""

import math

import numba
import numpy as np
from numba import prange

from .codes import (
    BALL, C_A, C_B, C_CLIP, C_F0, C_PHIA, C_PHIB, C_PROF, C_RADIUS, C_SEGLEN, C_TERMINAL,
    C_TWO_SIDED, C_TYPE, C_ZA, C_ZB, CYL_INNER, CYL_OUTER, CYLSEG, FAM_POWER, FAM_SUBEXP,
    HALFSPACE, OUTER_SPHERE, P_A1, P_A2, P_FAMILY, P_NTAB, P_TAB, P_ZFLOOR, P_ZMONO, PROBE_BALL,
    PROBE_BAND, TERM_EXHAUSTED, TERM_HORIZON, TERM_MAX_STEPS, THORN,
)
from .philox import uniforms_nb

_TWO_PI = 2.0 * math.pi
_INF = np.inf
_PHASE1 = 64
_PHASE2 = 10
_MAX_DEPTH = 20

jit = numba.njit(cache=True, nogil=True)
pjit = numba.njit(cache=True, nogil=True, parallel=True)


@jit
def prof_f(profs, j, z):
    if z < profs[j, P_ZFLOOR]:
        z = profs[j, P_ZFLOOR]
    fam = int(profs[j, P_FAMILY])
    if fam == FAM_POWER:
        a = profs[j, P_A1]
        if a == 0.0:
            return 1.0
        return z**a
    u = math.log(z)
    if fam == FAM_SUBEXP:
        return math.exp(u - profs[j, P_A1] * u ** profs[j, P_A2])
    n = int(profs[j, P_NTAB])
    b = P_TAB
    if u <= profs[j, b]:
        return math.exp(profs[j, b + n])
    if u >= profs[j, b + n - 1]:
        return math.exp(profs[j, b + 2 * n - 1])
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if profs[j, b + mid] <= u:
            lo = mid
        else:
            hi = mid
    t = (u - profs[j, b + lo]) / (profs[j, b + hi] - profs[j, b + lo])
    return math.exp(profs[j, b + n + lo] + t * (profs[j, b + n + hi] - profs[j, b + n + lo]))


@jit
def _arc_dist(zs, r, rad, phimax):
    # distance from (zs, r) to the arc rad*(cos t, sin t), t in [0, phimax]
    psi = math.atan2(r, zs)
    if psi <= phimax:
        return abs(math.hypot(zs, r) - rad)
    return math.hypot(zs - rad * math.cos(phimax), r - rad * math.sin(phimax))


@jit
def _graph_pred(profs, j, zmono, zs, r, d, za, zb):
    # can the graph over [za, zb] come within L-inf distance d of (zs, r)?
    lo = max(za, zs - d)
    hi = min(zb, zs + d)
    if lo > hi:
        return False
    flo = prof_f(profs, j, lo)
    fhi = prof_f(profs, j, hi)
    if lo < zmono:
        fmin = prof_f(profs, j, min(hi, zmono))
        fmax = max(flo, fhi)
    else:
        fmin = flo
        fmax = fhi
    return fmin <= r + d and fmax >= r - d


@jit
def _graph_dist(profs, j, zs, r, za, zb):
    """Lower bound on the distance to the graph r = f(z), z in [za, zb]."""
    if not za < zb:
        return _INF
    zmono = profs[j, P_ZMONO]
    zc = min(max(zs, za), zb)
    hi = max(abs(zs - zc), abs(r - prof_f(profs, j, zc)))
    if hi == 0.0:
        return 0.0
    k = 0
    while k < _PHASE1 and _graph_pred(profs, j, zmono, zs, r, 0.5 * hi, za, zb):
        hi *= 0.5
        k += 1
    if k == _PHASE1:
        return 0.0
    lo = 0.5 * hi
    for _ in range(_PHASE2):
        mid = 0.5 * (lo + hi)
        if _graph_pred(profs, j, zmono, zs, r, mid, za, zb):
            hi = mid
        else:
            lo = mid
    return lo


@jit
def _thorn_side(row, profs, zs, r):
    R = row[C_RADIUS]
    clip = row[C_CLIP]
    if clip <= R:
        return _INF
    j = int(row[C_PROF])
    best = _arc_dist(zs, r, R, row[C_PHIA])
    if clip < _INF:
        best = min(best, _arc_dist(zs, r, clip, row[C_PHIB]))
    f0 = row[C_F0]
    if f0 > R:
        top = min(f0, clip)
        rr = min(max(r, R), top)
        best = min(best, math.hypot(zs, r - rr))
    if best > 0.0:
        best = min(best, _graph_dist(profs, j, zs, r, row[C_ZA], row[C_ZB]))
    return best


@jit
def thorn_contains_axis(row, profs, vx, vy, vz, x, y, z):
    n2 = x * x + y * y + z * z
    rad = math.sqrt(n2)
    if rad < row[C_RADIUS] or rad > row[C_CLIP]:
        return False
    zc = x * vx + y * vy + z * vz
    if zc < 0.0 and row[C_TWO_SIDED] == 0.0:
        return False
    r = math.sqrt(max(n2 - zc * zc, 0.0))
    return r <= prof_f(profs, int(row[C_PROF]), abs(zc))


@jit
def thorn_dist_axis(row, profs, vx, vy, vz, x, y, z):
    if thorn_contains_axis(row, profs, vx, vy, vz, x, y, z):
        return 0.0
    zc = x * vx + y * vy + z * vz
    r = math.sqrt(max(x * x + y * y + z * z - zc * zc, 0.0))
    d = _thorn_side(row, profs, zc, r)
    if row[C_TWO_SIDED] != 0.0 and d > 0.0:
        d = min(d, _thorn_side(row, profs, -zc, r))
    return d


@jit
def comp_dist(obs, k, profs, x, y, z):
    """Distance lower bound to component k; values <= 0 mean on or inside."""
    row = obs[k]
    t = int(row[C_TYPE])
    if t == THORN:
        return thorn_dist_axis(row, profs, row[C_A], row[C_A + 1], row[C_A + 2], x, y, z)
    dx = x - row[C_A]
    dy = y - row[C_A + 1]
    dz = z - row[C_A + 2]
    if t == OUTER_SPHERE:
        return row[C_RADIUS] - math.sqrt(dx * dx + dy * dy + dz * dz)
    if t == BALL:
        return math.sqrt(dx * dx + dy * dy + dz * dz) - row[C_RADIUS]
    if t == HALFSPACE:
        return row[C_RADIUS] - (x * row[C_A] + y * row[C_A + 1] + z * row[C_A + 2])
    if t == CYLSEG:
        ln = row[C_SEGLEN]
        tx = (row[C_B] - row[C_A]) / ln
        ty = (row[C_B + 1] - row[C_A + 1]) / ln
        tz = (row[C_B + 2] - row[C_A + 2]) / ln
        s = dx * tx + dy * ty + dz * tz
        ex = dx - s * tx
        ey = dy - s * ty
        ez = dz - s * tz
        rho = math.sqrt(ex * ex + ey * ey + ez * ez)
        dr = rho - row[C_RADIUS]
        if s < 0.0:
            ds = -s
        elif s > ln:
            ds = s - ln
        else:
            return dr if dr > 0.0 else max(dr, -s, s - ln)
        if dr <= 0.0:
            return ds
        return math.hypot(ds, dr)
    # infinite cylinders: axis through C_A with direction C_B
    s = dx * row[C_B] + dy * row[C_B + 1] + dz * row[C_B + 2]
    ex = dx - s * row[C_B]
    ey = dy - s * row[C_B + 1]
    ez = dz - s * row[C_B + 2]
    rho = math.sqrt(ex * ex + ey * ey + ez * ez)
    if t == CYL_INNER:
        return rho - row[C_RADIUS]
    return row[C_RADIUS] - rho


@jit
def comp_contains(obs, k, profs, x, y, z):
    row = obs[k]
    if int(row[C_TYPE]) == THORN:
        return thorn_contains_axis(row, profs, row[C_A], row[C_A + 1], row[C_A + 2], x, y, z)
    return comp_dist(obs, k, profs, x, y, z) <= 0.0


@pjit
def dist_points(obs, profs, pts):
    n = pts.shape[0]
    K = obs.shape[0]
    out = np.empty((n, K))
    for i in prange(n):
        for k in range(K):
            out[i, k] = comp_dist(obs, k, profs, pts[i, 0], pts[i, 1], pts[i, 2])
    return out


@pjit
def contains_points(obs, profs, pts):
    n = pts.shape[0]
    K = obs.shape[0]
    out = np.zeros((n, K), dtype=np.bool_)
    for i in prange(n):
        for k in range(K):
            out[i, k] = comp_contains(obs, k, profs, pts[i, 0], pts[i, 1], pts[i, 2])
    return out


@jit
def _scan(obs, profs, x, y, z, eps, alive, hit_row, step):
    """Distances at a point: returns (step radius, terminal hit index, alive).

    First-hit steps of components within ``eps`` are written to ``hit_row``.
    """
    dmin = _INF
    kt = -1
    tmin = _INF
    for k in range(obs.shape[0]):
        bit = np.int64(1) << k
        if not (alive & bit):
            continue
        d = comp_dist(obs, k, profs, x, y, z)
        if d < eps:
            hit_row[k] = step
            if obs[k, C_TERMINAL] != 0.0:
                if d < tmin:
                    tmin = d
                    kt = k
            else:
                alive &= ~bit
            continue
        if d < dmin:
            dmin = d
    return dmin, kt, alive


@pjit
def wos_kernel(obs, profs, starts, pids, seed, tag, eps, max_steps):
    """Walk-on-spheres with terminal and soft components.

    Soft components record their first-hit step when the walk comes within
    ``eps`` and are then ignored; the walk stops at the first terminal
    component (whose step is recorded too).  Never-hit entries stay -1.
    """
    n = starts.shape[0]
    K = obs.shape[0]
    term = np.empty(n, dtype=np.int64)
    hits = np.full((n, K), -1, dtype=np.int64)
    steps = np.zeros(n, dtype=np.int64)
    exitp = np.empty((n, 3))
    full = (np.int64(1) << K) - 1
    for i in prange(n):
        x = starts[i, 0]
        y = starts[i, 1]
        z = starts[i, 2]
        alive = full
        step = 0
        code = TERM_MAX_STEPS
        pid = pids[i]
        while True:
            dmin, kt, alive = _scan(obs, profs, x, y, z, eps, alive, hits[i], step)
            if kt >= 0:
                code = kt
                break
            if dmin == _INF:
                code = TERM_EXHAUSTED
                break
            if step >= max_steps:
                break
            u0, u1, _, _ = uniforms_nb(seed, tag, step, pid)
            cz = 2.0 * u0 - 1.0
            sz = math.sqrt(max(1.0 - cz * cz, 0.0))
            ph = _TWO_PI * u1
            x += dmin * sz * math.cos(ph)
            y += dmin * sz * math.sin(ph)
            z += dmin * cz
            step += 1
        term[i] = code
        steps[i] = step
        exitp[i, 0] = x
        exitp[i, 1] = y
        exitp[i, 2] = z
    return term, hits, exitp, steps


@jit
def _normals(seed, tag, step, pid):
    u0, u1, u2, u3 = uniforms_nb(seed, tag, step, pid)
    r0 = math.sqrt(-2.0 * math.log(u0))
    r1 = math.sqrt(-2.0 * math.log(u2))
    return r0 * math.cos(_TWO_PI * u1), r0 * math.sin(_TWO_PI * u1), r1 * math.cos(_TWO_PI * u3)


@jit
def _probe_state(probe, x, y, z):
    # (inside, distance to the probe surface)
    kind = int(probe[0])
    if kind == 0:
        return 0.0, _INF
    dx = x - probe[1]
    dy = y - probe[2]
    dz = z - probe[3]
    rr = math.sqrt(dx * dx + dy * dy + dz * dz)
    if kind == PROBE_BALL:
        return (1.0 if rr <= probe[4] else 0.0), abs(rr - probe[4])
    inside = 1.0 if (probe[4] <= rr and rr <= probe[5]) else 0.0
    return inside, min(abs(rr - probe[4]), abs(rr - probe[5]))


@pjit
def em_kernel(obs, profs, starts, pids, seed, tag, eps, max_steps, dt_factor, sigma_max, probe, t_max):
    """Adaptive Euler-Maruyama run to absorption with probe occupation time.

    Step sd = min(dt_factor * min(d, max(e, floor)), sigma_max) where d is the
    boundary distance and e the distance to the probe surface; occupation is
    accumulated with the trapezoid rule.  ``t_max > 0`` adds a time horizon.
    """
    n = starts.shape[0]
    K = obs.shape[0]
    term = np.empty(n, dtype=np.int64)
    hits = np.full((n, K), -1, dtype=np.int64)
    steps = np.zeros(n, dtype=np.int64)
    occ = np.zeros(n)
    tend = np.zeros(n)
    endp = np.empty((n, 3))
    full = (np.int64(1) << K) - 1
    floor = probe[6]
    for i in prange(n):
        x = starts[i, 0]
        y = starts[i, 1]
        z = starts[i, 2]
        alive = full
        step = 0
        code = TERM_MAX_STEPS
        pid = pids[i]
        t = 0.0
        acc = 0.0
        in0, e = _probe_state(probe, x, y, z)
        while True:
            dmin, kt, alive = _scan(obs, profs, x, y, z, eps, alive, hits[i], step)
            if kt >= 0:
                code = kt
                break
            if dmin == _INF:
                code = TERM_EXHAUSTED
                break
            if step >= max_steps:
                break
            sig = dt_factor * min(dmin, max(e, floor))
            if sig > sigma_max:
                sig = sigma_max
            dt = sig * sig
            last = False
            if t_max > 0.0 and t + dt >= t_max:
                dt = t_max - t
                sig = math.sqrt(dt)
                last = True
            g0, g1, g2 = _normals(seed, tag, step, pid)
            x += sig * g0
            y += sig * g1
            z += sig * g2
            in1, e = _probe_state(probe, x, y, z)
            acc += 0.5 * dt * (in0 + in1)
            in0 = in1
            t += dt
            step += 1
            if last:
                code = TERM_HORIZON
                break
        term[i] = code
        steps[i] = step
        occ[i] = acc
        tend[i] = t
        endp[i, 0] = x
        endp[i, 1] = y
        endp[i, 2] = z
    return occ, term, hits, endp, steps, tend


@jit
def em_record_kernel(obs, profs, start, pid, seed, tag, eps, max_steps, dt_factor, sigma_max,
                     probe, keep_every, near, cap):
    """One EM path (same step rule as ``em_kernel``) with a decimated polyline.

    Keeps every ``keep_every``-th vertex plus every vertex within ``near``
    of the boundary.  Returns (vertices, count, overflowed, code, steps, t,
    hit steps, occupation).
    """
    K = obs.shape[0]
    verts = np.empty((cap, 3))
    hits = np.full(K, -1, dtype=np.int64)
    x = start[0]
    y = start[1]
    z = start[2]
    verts[0, 0] = x
    verts[0, 1] = y
    verts[0, 2] = z
    nv = 1
    alive = (np.int64(1) << K) - 1
    step = 0
    code = TERM_MAX_STEPS
    t = 0.0
    acc = 0.0
    over = False
    floor = probe[6]
    in0, e = _probe_state(probe, x, y, z)
    while True:
        dmin, kt, alive = _scan(obs, profs, x, y, z, eps, alive, hits, step)
        if kt >= 0:
            code = kt
            break
        if dmin == _INF:
            code = TERM_EXHAUSTED
            break
        if step >= max_steps:
            break
        sig = dt_factor * min(dmin, max(e, floor))
        if sig > sigma_max:
            sig = sigma_max
        dt = sig * sig
        g0, g1, g2 = _normals(seed, tag, step, pid)
        x += sig * g0
        y += sig * g1
        z += sig * g2
        in1, e = _probe_state(probe, x, y, z)
        acc += 0.5 * dt * (in0 + in1)
        in0 = in1
        t += dt
        step += 1
        if step % keep_every == 0 or dmin < near:
            if nv >= cap:
                over = True
                break
            verts[nv, 0] = x
            verts[nv, 1] = y
            verts[nv, 2] = z
            nv += 1
    if not over:
        # the final point always closes the polyline
        if verts[nv - 1, 0] != x or verts[nv - 1, 1] != y or verts[nv - 1, 2] != z:
            if nv >= cap:
                over = True
            else:
                verts[nv, 0] = x
                verts[nv, 1] = y
                verts[nv, 2] = z
                nv += 1
    return verts, nv, over, code, step, t, hits, acc


@jit
def _seg_hits_thorn(row, profs, vx, vy, vz, ax, ay, az, bx, by, bz, guard):
    da = thorn_dist_axis(row, profs, vx, vy, vz, ax, ay, az)
    if da <= guard:
        return True
    db = thorn_dist_axis(row, profs, vx, vy, vz, bx, by, bz)
    if db <= guard:
        return True
    ln = math.sqrt((bx - ax) ** 2 + (by - ay) ** 2 + (bz - az) ** 2)
    s0 = np.empty(64)
    s1 = np.empty(64)
    sd0 = np.empty(64)
    sd1 = np.empty(64)
    sdep = np.empty(64, dtype=np.int64)
    top = 0
    s0[0] = 0.0
    s1[0] = 1.0
    sd0[0] = da
    sd1[0] = db
    sdep[0] = 0
    top = 1
    while top > 0:
        top -= 1
        t0 = s0[top]
        t1 = s1[top]
        d0 = sd0[top]
        d1 = sd1[top]
        dep = sdep[top]
        if d0 + d1 > (t1 - t0) * ln:
            continue
        if dep >= _MAX_DEPTH:
            return True
        tm = 0.5 * (t0 + t1)
        dm = thorn_dist_axis(row, profs, vx, vy, vz,
                             ax + tm * (bx - ax), ay + tm * (by - ay), az + tm * (bz - az))
        if dm <= guard:
            return True
        s0[top] = t0
        s1[top] = tm
        sd0[top] = d0
        sd1[top] = dm
        sdep[top] = dep + 1
        s0[top + 1] = tm
        s1[top + 1] = t1
        sd0[top + 1] = dm
        sd1[top + 1] = d1
        sdep[top + 1] = dep + 1
        top += 2
    return False


@jit
def polyline_hits_thorn(row, profs, verts, guard):
    vx = row[C_A]
    vy = row[C_A + 1]
    vz = row[C_A + 2]
    n = verts.shape[0]
    for i in range(n):
        if thorn_contains_axis(row, profs, vx, vy, vz, verts[i, 0], verts[i, 1], verts[i, 2]):
            return True
    if n == 1:
        return thorn_dist_axis(row, profs, vx, vy, vz, verts[0, 0], verts[0, 1], verts[0, 2]) <= guard
    for i in range(n - 1):
        if _seg_hits_thorn(row, profs, vx, vy, vz, verts[i, 0], verts[i, 1], verts[i, 2],
                           verts[i + 1, 0], verts[i + 1, 1], verts[i + 1, 2], guard):
            return True
    return False


@pjit
def wl_kernel(dirs, profs, trow, radii, pids, seed, tag, eps, max_steps, dt_factor):
    """Free EM paths from the origin; per direction, did the path avoid the thorn?

    Returns ``avoid[path, checkpoint, direction]`` snapshots taken when the
    path first reaches each radius in ``radii`` (increasing), the step counts
    and a flag for paths cut off by ``max_steps``.
    """
    n = pids.shape[0]
    N = dirs.shape[0]
    nc = radii.shape[0]
    avoid = np.zeros((n, nc, N), dtype=np.uint8)
    steps = np.zeros(n, dtype=np.int64)
    cut = np.zeros(n, dtype=np.bool_)
    jp = int(trow[C_PROF])
    R_in = trow[C_RADIUS]
    for i in prange(n):
        active = np.arange(N)
        nact = N
        x = 0.0
        y = 0.0
        z = 0.0
        ck = 0
        step = 0
        pid = pids[i]
        while True:
            rad = math.sqrt(x * x + y * y + z * z)
            dck = radii[ck] - rad
            if dck < eps:
                for a in range(nact):
                    avoid[i, ck, active[a]] = 1
                ck += 1
                if ck == nc:
                    break
                continue
            if step >= max_steps:
                cut[i] = True
                break
            scale = prof_f(profs, jp, max(rad, R_in))
            sig = dt_factor * min(dck, scale)
            g0, g1, g2 = _normals(seed, tag, step, pid)
            nx = x + sig * g0
            ny = y + sig * g1
            nz = z + sig * g2
            step += 1
            if nact > 0:
                mx = 0.5 * (x + nx)
                my = 0.5 * (y + ny)
                mz = 0.5 * (z + nz)
                h = 0.5 * sig * math.sqrt(g0 * g0 + g1 * g1 + g2 * g2)
                mm = mx * mx + my * my + mz * mz
                mrad = math.sqrt(mm)
                if mrad + h + eps >= R_in:
                    # no point of the segment is within eps of a thorn whose
                    # axis is farther than f(|m| + h) + h + eps from the midpoint
                    fq = prof_f(profs, jp, mrad + h) + h + eps
                    thr = fq * fq
                    a = nact - 1
                    while a >= 0:
                        idx = active[a]
                        zm = mx * dirs[idx, 0] + my * dirs[idx, 1] + mz * dirs[idx, 2]
                        if mm - zm * zm <= thr:
                            if _seg_hits_thorn(trow, profs, dirs[idx, 0], dirs[idx, 1], dirs[idx, 2],
                                               x, y, z, nx, ny, nz, eps):
                                nact -= 1
                                active[a] = active[nact]
                                active[nact] = idx
                        a -= 1
            x = nx
            y = ny
            z = nz
        steps[i] = step
    return avoid, steps, cut
