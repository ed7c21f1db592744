"""Pure-numpy fallback for the kernels in ``_nb``.

Paths are advanced in lock-step over fixed-size chunks; since every active
path takes exactly one step per sweep, the sweep index equals each path's
own step counter and the random streams coincide with the numba kernels.
"""

import math

import numpy as np

from .codes import (
    BALL, C_A, C_B, C_CLIP, C_F0, C_PHIA, C_PHIB, C_PROF, C_RADIUS, C_SEGLEN, C_TERMINAL,
    C_TWO_SIDED, C_TYPE, C_ZA, C_ZB, CYL_INNER, CYLSEG, FAM_POWER, FAM_SUBEXP, HALFSPACE,
    OUTER_SPHERE, P_A1, P_A2, P_FAMILY, P_NTAB, P_TAB, P_ZFLOOR, P_ZMONO, PROBE_BALL,
    TERM_EXHAUSTED, TERM_HORIZON, TERM_MAX_STEPS, THORN,
)
from .philox import uniforms

CHUNK = 4096
_TWO_PI = 2.0 * math.pi
_PHASE1 = 64
_PHASE2 = 10
_MAX_DEPTH = 20


def prof_f(profs, j, z):
    z = np.maximum(np.asarray(z, dtype=float), profs[j, P_ZFLOOR])
    fam = int(profs[j, P_FAMILY])
    if fam == FAM_POWER:
        a = profs[j, P_A1]
        return np.ones_like(z) if a == 0.0 else z**a
    u = np.log(z)
    if fam == FAM_SUBEXP:
        return np.exp(u - profs[j, P_A1] * u ** profs[j, P_A2])
    n = int(profs[j, P_NTAB])
    lz = profs[j, P_TAB:P_TAB + n]
    lf = profs[j, P_TAB + n:P_TAB + 2 * n]
    return np.exp(np.interp(u, lz, lf))


def _arc_dist(zs, r, rad, phimax):
    psi = np.arctan2(r, zs)
    on = np.abs(np.hypot(zs, r) - rad)
    end = np.hypot(zs - rad * np.cos(phimax), r - rad * np.sin(phimax))
    return np.where(psi <= phimax, on, end)


def _graph_pred(profs, j, zmono, zs, r, d, za, zb):
    lo = np.maximum(za, zs - d)
    hi = np.minimum(zb, zs + d)
    ok = lo <= hi
    lo_c = np.where(ok, lo, za)
    hi_c = np.where(ok, hi, za)
    flo = prof_f(profs, j, lo_c)
    fhi = prof_f(profs, j, hi_c)
    dip = lo_c < zmono
    if np.any(dip):
        fmin = np.where(dip, prof_f(profs, j, np.minimum(hi_c, zmono)), flo)
        fmax = np.where(dip, np.maximum(flo, fhi), fhi)
    else:
        fmin, fmax = flo, fhi
    return ok & (fmin <= r + d) & (fmax >= r - d)


def _graph_dist(profs, j, zs, r, za, zb):
    out = np.full(zs.shape, np.inf)
    if not za < zb:
        return out
    zmono = profs[j, P_ZMONO]
    zc = np.minimum(np.maximum(zs, za), zb)
    hi = np.maximum(np.abs(zs - zc), np.abs(r - prof_f(profs, j, zc)))
    out[:] = 0.0
    idx = np.nonzero(hi > 0)[0]
    hi = hi[idx]
    zs_i, r_i = zs[idx], r[idx]
    count = np.zeros(idx.size, dtype=np.int64)
    live = np.arange(idx.size)
    for _ in range(_PHASE1):
        if live.size == 0:
            break
        p = _graph_pred(profs, j, zmono, zs_i[live], r_i[live], 0.5 * hi[live], za, zb)
        hi[live[p]] *= 0.5
        count[live[p]] += 1
        live = live[p]
    good = count < _PHASE1
    lo = 0.5 * hi
    for _ in range(_PHASE2):
        mid = 0.5 * (lo + hi)
        p = _graph_pred(profs, j, zmono, zs_i, r_i, mid, za, zb)
        hi = np.where(p, mid, hi)
        lo = np.where(p, lo, mid)
    out[idx] = np.where(good, lo, 0.0)
    return out


def _thorn_side(row, profs, zs, r):
    R = row[C_RADIUS]
    clip = row[C_CLIP]
    if clip <= R:
        return np.full(zs.shape, np.inf)
    j = int(row[C_PROF])
    best = _arc_dist(zs, r, R, row[C_PHIA])
    if clip < np.inf:
        best = np.minimum(best, _arc_dist(zs, r, clip, row[C_PHIB]))
    f0 = row[C_F0]
    if f0 > R:
        rr = np.minimum(np.maximum(r, R), min(f0, clip))
        best = np.minimum(best, np.hypot(zs, r - rr))
    pos = best > 0
    if np.any(pos):
        g = _graph_dist(profs, j, zs[pos], r[pos], row[C_ZA], row[C_ZB])
        best[pos] = np.minimum(best[pos], g)
    return best


def thorn_contains_axis(row, profs, v, p):
    n2 = np.einsum("ij,ij->i", p, p)
    rad = np.sqrt(n2)
    zc = np.einsum("ij,ij->i", p, v)
    r = np.sqrt(np.maximum(n2 - zc * zc, 0.0))
    ok = (rad >= row[C_RADIUS]) & (rad <= row[C_CLIP])
    if row[C_TWO_SIDED] == 0.0:
        ok &= zc >= 0.0
    return ok & (r <= prof_f(profs, int(row[C_PROF]), np.abs(zc)))


def thorn_dist_axis(row, profs, v, p):
    """Distance bounds for points ``p`` (n, 3) against thorns with axes ``v`` (n, 3)."""
    inside = thorn_contains_axis(row, profs, v, p)
    zc = np.einsum("ij,ij->i", p, v)
    r = np.sqrt(np.maximum(np.einsum("ij,ij->i", p, p) - zc * zc, 0.0))
    out = np.zeros(p.shape[0])
    o = ~inside
    if np.any(o):
        d = _thorn_side(row, profs, zc[o], r[o])
        if row[C_TWO_SIDED] != 0.0:
            d = np.minimum(d, _thorn_side(row, profs, -zc[o], r[o]))
        out[o] = d
    return out


def comp_dist(obs, k, profs, p):
    row = obs[k]
    t = int(row[C_TYPE])
    if t == THORN:
        return thorn_dist_axis(row, profs, np.broadcast_to(row[C_A:C_A + 3], p.shape), p)
    d = p - row[C_A:C_A + 3]
    if t == OUTER_SPHERE:
        return row[C_RADIUS] - np.sqrt(np.einsum("ij,ij->i", d, d))
    if t == BALL:
        return np.sqrt(np.einsum("ij,ij->i", d, d)) - row[C_RADIUS]
    if t == HALFSPACE:
        return row[C_RADIUS] - p @ row[C_A:C_A + 3]
    if t == CYLSEG:
        ln = row[C_SEGLEN]
        tv = (row[C_B:C_B + 3] - row[C_A:C_A + 3]) / ln
        s = d @ tv
        e = d - s[:, None] * tv
        rho = np.sqrt(np.einsum("ij,ij->i", e, e))
        dr = rho - row[C_RADIUS]
        ds = np.where(s < 0, -s, s - ln)
        mid = (s >= 0) & (s <= ln)
        inner = np.where(dr > 0, dr, np.maximum(np.maximum(dr, -s), s - ln))
        outer = np.where(dr <= 0, ds, np.hypot(ds, dr))
        return np.where(mid, inner, outer)
    s = d @ row[C_B:C_B + 3]
    e = d - s[:, None] * row[C_B:C_B + 3]
    rho = np.sqrt(np.einsum("ij,ij->i", e, e))
    if t == CYL_INNER:
        return rho - row[C_RADIUS]
    return row[C_RADIUS] - rho


def comp_contains(obs, k, profs, p):
    row = obs[k]
    if int(row[C_TYPE]) == THORN:
        return thorn_contains_axis(row, profs, np.broadcast_to(row[C_A:C_A + 3], p.shape), p)
    return comp_dist(obs, k, profs, p) <= 0.0


def dist_points(obs, profs, pts):
    pts = np.ascontiguousarray(pts, dtype=float)
    out = np.empty((pts.shape[0], obs.shape[0]))
    for k in range(obs.shape[0]):
        out[:, k] = comp_dist(obs, k, profs, pts)
    return out


def contains_points(obs, profs, pts):
    pts = np.ascontiguousarray(pts, dtype=float)
    out = np.zeros((pts.shape[0], obs.shape[0]), dtype=bool)
    for k in range(obs.shape[0]):
        out[:, k] = comp_contains(obs, k, profs, pts)
    return out


def _scan(obs, profs, p, eps, alive, hits, step):
    """Vectorised component scan; updates ``alive`` and first-hit steps in place."""
    n = p.shape[0]
    K = obs.shape[0]
    dmin = np.full(n, np.inf)
    kt = np.full(n, -1, dtype=np.int64)
    tmin = np.full(n, np.inf)
    for k in range(K):
        bit = np.int64(1) << np.int64(k)
        act = (alive & bit) != 0
        if not np.any(act):
            continue
        idx = np.nonzero(act)[0]
        d = comp_dist(obs, k, profs, p[idx])
        close = d < eps
        hits[idx[close], k] = step
        if obs[k, C_TERMINAL] != 0.0:
            better = close & (d < tmin[idx])
            tmin[idx[better]] = d[better]
            kt[idx[better]] = k
        else:
            alive[idx[close]] &= ~bit
        far = ~close
        dmin[idx[far]] = np.minimum(dmin[idx[far]], d[far])
    return dmin, kt


def _normals(seed, tag, step, pids):
    u0, u1, u2, u3 = uniforms(seed, tag, np.full(pids.shape, step, dtype=np.uint64), pids)
    r0 = np.sqrt(-2.0 * np.log(u0))
    r1 = np.sqrt(-2.0 * np.log(u2))
    return np.stack([r0 * np.cos(_TWO_PI * u1), r0 * np.sin(_TWO_PI * u1), r1 * np.cos(_TWO_PI * u3)], axis=1)


def _chunks(n):
    for lo in range(0, n, CHUNK):
        yield slice(lo, min(n, lo + CHUNK))


def wos_kernel(obs, profs, starts, pids, seed, tag, eps, max_steps):
    n = starts.shape[0]
    K = obs.shape[0]
    term = np.full(n, TERM_MAX_STEPS, dtype=np.int64)
    hits = np.full((n, K), -1, dtype=np.int64)
    steps = np.zeros(n, dtype=np.int64)
    exitp = np.array(starts, dtype=float, copy=True)
    full = (np.int64(1) << np.int64(K)) - 1
    for sl in _chunks(n):
        p = exitp[sl].copy()
        ids = np.asarray(pids[sl], dtype=np.uint64)
        alive = np.full(p.shape[0], full, dtype=np.int64)
        hit = np.full((p.shape[0], K), -1, dtype=np.int64)
        code = np.full(p.shape[0], TERM_MAX_STEPS, dtype=np.int64)
        nst = np.zeros(p.shape[0], dtype=np.int64)
        live = np.arange(p.shape[0])
        step = 0
        while live.size:
            a_l, h_l = alive[live], hit[live]
            dmin, kt = _scan(obs, profs, p[live], eps, a_l, h_l, step)
            alive[live], hit[live] = a_l, h_l
            done = kt >= 0
            code[live[done]] = kt[done]
            ex = ~done & np.isinf(dmin)
            code[live[ex]] = TERM_EXHAUSTED
            keep = ~done & ~ex
            live, dmin = live[keep], dmin[keep]
            if step >= max_steps or not live.size:
                break
            u0, u1, _, _ = uniforms(seed, tag, np.full(live.shape, step, dtype=np.uint64), ids[live])
            cz = 2.0 * u0 - 1.0
            sz = np.sqrt(np.maximum(1.0 - cz * cz, 0.0))
            ph = _TWO_PI * u1
            p[live, 0] += dmin * sz * np.cos(ph)
            p[live, 1] += dmin * sz * np.sin(ph)
            p[live, 2] += dmin * cz
            step += 1
            nst[live] = step
        term[sl] = code
        hits[sl] = hit
        steps[sl] = nst
        exitp[sl] = p
    return term, hits, exitp, steps


def _probe_state(probe, p):
    kind = int(probe[0])
    if kind == 0:
        return np.zeros(p.shape[0]), np.full(p.shape[0], np.inf)
    d = p - probe[1:4]
    rr = np.sqrt(np.einsum("ij,ij->i", d, d))
    if kind == PROBE_BALL:
        return (rr <= probe[4]).astype(float), np.abs(rr - probe[4])
    inside = ((probe[4] <= rr) & (rr <= probe[5])).astype(float)
    return inside, np.minimum(np.abs(rr - probe[4]), np.abs(rr - probe[5]))


def em_kernel(obs, profs, starts, pids, seed, tag, eps, max_steps, dt_factor, sigma_max, probe, t_max):
    n = starts.shape[0]
    K = obs.shape[0]
    term = np.full(n, TERM_MAX_STEPS, dtype=np.int64)
    hits = np.full((n, K), -1, dtype=np.int64)
    steps = np.zeros(n, dtype=np.int64)
    occ = np.zeros(n)
    tend = np.zeros(n)
    endp = np.array(starts, dtype=float, copy=True)
    full = (np.int64(1) << np.int64(K)) - 1
    floor = probe[6]
    for sl in _chunks(n):
        p = endp[sl].copy()
        ids = np.asarray(pids[sl], dtype=np.uint64)
        m = p.shape[0]
        alive = np.full(m, full, dtype=np.int64)
        hit = np.full((m, K), -1, dtype=np.int64)
        code = np.full(m, TERM_MAX_STEPS, dtype=np.int64)
        acc = np.zeros(m)
        t = np.zeros(m)
        nstep = np.zeros(m, dtype=np.int64)
        in0, e = _probe_state(probe, p)
        live = np.arange(m)
        step = 0
        while live.size:
            a_l, h_l = alive[live], hit[live]
            dmin, kt = _scan(obs, profs, p[live], eps, a_l, h_l, step)
            alive[live], hit[live] = a_l, h_l
            done = kt >= 0
            code[live[done]] = kt[done]
            ex = ~done & np.isinf(dmin)
            code[live[ex]] = TERM_EXHAUSTED
            keep = ~done & ~ex
            live, dmin = live[keep], dmin[keep]
            if step >= max_steps or not live.size:
                break
            sig = np.minimum(dt_factor * np.minimum(dmin, np.maximum(e[live], floor)), sigma_max)
            dt = sig * sig
            last = np.zeros(live.size, dtype=bool)
            if t_max > 0.0:
                last = t[live] + dt >= t_max
                dt = np.where(last, t_max - t[live], dt)
                sig = np.where(last, np.sqrt(dt), sig)
            g = _normals(seed, tag, step, ids[live])
            p[live] += sig[:, None] * g
            in1, e_new = _probe_state(probe, p[live])
            acc[live] += 0.5 * dt * (in0[live] + in1)
            in0[live] = in1
            e[live] = e_new
            t[live] += dt
            step += 1
            nstep[live] = step
            code[live[last]] = TERM_HORIZON
            live = live[~last]
        term[sl] = code
        hits[sl] = hit
        steps[sl] = nstep
        occ[sl] = acc
        tend[sl] = t
        endp[sl] = p
    return occ, term, hits, endp, steps, tend


def em_record_kernel(obs, profs, start, pid, seed, tag, eps, max_steps, dt_factor, sigma_max,
                     probe, keep_every, near, cap):
    K = obs.shape[0]
    p = np.array(start, dtype=float).reshape(1, 3)
    ids = np.array([pid], dtype=np.uint64)
    verts = [p[0].copy()]
    alive = np.full(1, (np.int64(1) << np.int64(K)) - 1, dtype=np.int64)
    hits = np.full((1, K), -1, dtype=np.int64)
    step = 0
    code = TERM_MAX_STEPS
    t = 0.0
    acc = 0.0
    over = False
    floor = probe[6]
    in0, e = _probe_state(probe, p)
    while True:
        dmin, kt = _scan(obs, profs, p, eps, alive, hits, step)
        if kt[0] >= 0:
            code = int(kt[0])
            break
        if np.isinf(dmin[0]):
            code = TERM_EXHAUSTED
            break
        if step >= max_steps:
            break
        sig = min(dt_factor * min(dmin[0], max(e[0], floor)), sigma_max)
        dt = sig * sig
        p = p + sig * _normals(seed, tag, step, ids)
        in1, e = _probe_state(probe, p)
        acc += 0.5 * dt * (in0[0] + in1[0])
        in0 = in1
        t += dt
        step += 1
        if step % keep_every == 0 or dmin[0] < near:
            if len(verts) >= cap:
                over = True
                break
            verts.append(p[0].copy())
    if not over and np.any(verts[-1] != p[0]):
        if len(verts) >= cap:
            over = True
        else:
            verts.append(p[0].copy())
    out = np.zeros((cap, 3))
    nv = min(len(verts), cap)
    out[:nv] = np.array(verts[:nv])
    return out, nv, over, code, step, t, hits[0], acc


def _seg_hits_many(row, profs, v, a, b, guard):
    """Vectorised conservative segment test: one thorn axis and segment per row."""
    m = a.shape[0]
    res = np.zeros(m, dtype=bool)
    if m == 0:
        return res
    da = thorn_dist_axis(row, profs, v, a)
    db = thorn_dist_axis(row, profs, v, b)
    res |= (da <= guard) | (db <= guard)
    ln = np.sqrt(np.einsum("ij,ij->i", b - a, b - a))
    who = np.nonzero(~res)[0]
    t0 = np.zeros(who.size)
    t1 = np.ones(who.size)
    d0, d1 = da[who], db[who]
    dep = np.zeros(who.size, dtype=np.int64)
    while who.size:
        need = ~res[who] & (d0 + d1 <= (t1 - t0) * ln[who])
        who, t0, t1, d0, d1, dep = who[need], t0[need], t1[need], d0[need], d1[need], dep[need]
        if not who.size:
            break
        deep = dep >= _MAX_DEPTH
        res[who[deep]] = True
        keep = ~deep
        who, t0, t1, d0, d1, dep = who[keep], t0[keep], t1[keep], d0[keep], d1[keep], dep[keep]
        tm = 0.5 * (t0 + t1)
        pm = a[who] + tm[:, None] * (b[who] - a[who])
        dm = thorn_dist_axis(row, profs, v[who], pm)
        res[who[dm <= guard]] = True
        who = np.concatenate([who, who])
        t0, t1 = np.concatenate([t0, tm]), np.concatenate([tm, t1])
        d0, d1 = np.concatenate([d0, dm]), np.concatenate([dm, d1])
        dep = np.concatenate([dep + 1, dep + 1])
    return res


def polyline_hits_thorn(row, profs, verts, guard):
    verts = np.asarray(verts, dtype=float).reshape(-1, 3)
    v = np.broadcast_to(row[C_A:C_A + 3], verts.shape)
    if np.any(thorn_contains_axis(row, profs, v, verts)):
        return True
    if verts.shape[0] == 1:
        return bool(thorn_dist_axis(row, profs, v, verts)[0] <= guard)
    a, b = verts[:-1], verts[1:]
    return bool(np.any(_seg_hits_many(row, profs, v[:-1], a, b, guard)))


def wl_kernel(dirs, profs, trow, radii, pids, seed, tag, eps, max_steps, dt_factor):
    n = pids.shape[0]
    N = dirs.shape[0]
    nc = radii.shape[0]
    avoid = np.zeros((n, nc, N), dtype=np.uint8)
    steps = np.zeros(n, dtype=np.int64)
    cut = np.zeros(n, dtype=bool)
    jp = int(trow[C_PROF])
    R_in = trow[C_RADIUS]
    chunk = max(1, CHUNK // 8)
    for lo in range(0, n, chunk):
        sl = slice(lo, min(n, lo + chunk))
        ids = np.asarray(pids[sl], dtype=np.uint64)
        m = ids.size
        p = np.zeros((m, 3))
        act = np.ones((m, N), dtype=bool)
        ck = np.zeros(m, dtype=np.int64)
        nst = np.zeros(m, dtype=np.int64)
        live = np.arange(m)
        step = 0
        while live.size:
            # checkpoint snapshots; a path may pass several in one sweep only via eps
            while True:
                rad = np.sqrt(np.einsum("ij,ij->i", p[live], p[live]))
                dck = radii[ck[live]] - rad
                reach = dck < eps
                if not np.any(reach):
                    break
                w = live[reach]
                avoid[lo + w, ck[w]] = act[w]
                ck[w] += 1
                live = live[ck[live] < nc]
                if not live.size:
                    break
            if not live.size:
                break
            if step >= max_steps:
                cut[lo + live] = True
                break
            rad = np.sqrt(np.einsum("ij,ij->i", p[live], p[live]))
            dck = radii[ck[live]] - rad
            scale = prof_f(profs, jp, np.maximum(rad, R_in))
            sig = dt_factor * np.minimum(dck, scale)
            g = _normals(seed, tag, step, ids[live])
            q0 = p[live]
            q1 = q0 + sig[:, None] * g
            step += 1
            nst[live] = step
            mid = 0.5 * (q0 + q1)
            h = 0.5 * sig * np.sqrt(np.einsum("ij,ij->i", g, g))
            mm = np.einsum("ij,ij->i", mid, mid)
            mrad = np.sqrt(mm)
            near = mrad + h + eps >= R_in
            if np.any(near):
                li = np.nonzero(near)[0]
                fq = prof_f(profs, jp, mrad[li] + h[li]) + h[li] + eps
                zm = mid[li] @ dirs.T
                cand = (mm[li, None] - zm * zm <= (fq * fq)[:, None]) & act[live[li]]
                ci, cd = np.nonzero(cand)
                if ci.size:
                    hits = _seg_hits_many(trow, profs, dirs[cd], q0[li[ci]], q1[li[ci]], eps)
                    act[live[li[ci[hits]]], cd[hits]] = False
            p[live] = q1
        steps[sl] = nst
    return avoid, steps, cut
