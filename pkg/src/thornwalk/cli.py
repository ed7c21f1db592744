"""Command-line front end.

Every subcommand writes JSON Lines records (one per line) to stdout or
``--out`` and a run manifest.  Records never contain the thread count or
timings, so identical seeds and configs give byte-identical output.

Exit codes: 0 success, 2 configuration error, 3 inconclusive statistics.
"""

from __future__ import annotations

import argparse
import ast
import csv
import json
import math
import operator
import os
import sys
import time
from typing import Optional

import numpy as np

from . import __version__, exact, greencheck, moments, profiles, sampler
from ._backend import backend
from .errors import DomainError, InsufficientSignal
from .geometry import Ball, Domain, ThornSet, Z_AXIS, domain_from_config
from .profiles import ThornProfile
from .sampler import Estimate, SimConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INCONCLUSIVE = 3


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


# number parsing -------------------------------------------------------------------

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.Pow: operator.pow, ast.USub: operator.neg,
        ast.UAdd: operator.pos}
_NAMES = {"pi": math.pi, "e": math.e}


def _num(text: str) -> float:
    """A float or a small arithmetic expression in pi and e (e.g. ``pi/4``, ``e**6``)."""
    try:
        return float(text)
    except ValueError:
        pass

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ValueError(text)

    try:
        return float(ev(ast.parse(text, mode="eval")))
    except (SyntaxError, ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")


def _numlist(text: str) -> list:
    return [_num(t) for t in text.split(",") if t.strip()]


def _point(text: str) -> tuple:
    v = _numlist(text)
    if len(v) != 3:
        raise argparse.ArgumentTypeError(f"need x,y,z: {text!r}")
    return tuple(v)


# output ---------------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k) if not isinstance(k, tuple) else ",".join(f"{c:g}" for c in k): _jsonable(v)
                for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        obj = float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, Estimate):
        return est_record(obj)
    return obj


def est_record(e: Estimate, quantity: Optional[str] = None, **extra) -> dict:
    rec = {"quantity": quantity or e.meta.get("quantity"), "value": e.mean, "stderr": e.stderr,
           "n": e.n, "seed": e.seed, "provenance": "MC", "meta": e.meta, "flags": e.flags}
    rec.update(extra)
    return rec


def exact_record(quantity: str, value, **extra) -> dict:
    rec = {"quantity": quantity, "value": value, "exact": True, "provenance": "formula"}
    rec.update(extra)
    return rec


class Emitter:
    def __init__(self, out: Optional[str]):
        self.records = []
        self.out = out

    def __call__(self, rec: dict):
        self.records.append(_jsonable(rec))

    def lines(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)

    def flush(self):
        text = self.lines()
        if self.out:
            with open(self.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)


def _write_csv(path: str, header: list, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


# argument groups --------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--seed", type=int, default=0, help="64-bit seed")
    p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    p.add_argument("--n", type=int, default=10_000, help="number of paths")
    p.add_argument("--eps", type=_num, default=None, help="absorption shell (default 1e-4 L)")
    p.add_argument("--dt-factor", type=_num, default=0.25)
    p.add_argument("--max-steps", type=int, default=1_000_000)
    p.add_argument("--out", default=None, help="write records here instead of stdout")
    p.add_argument("--manifest", default=None, help="manifest path (default next to --out, or ./thornwalk_manifest.json)")
    p.add_argument("--config", default=None, help="JSON file whose keys override flags")


def _add_profile(p, alpha_flag: str = "--alpha"):
    g = p.add_argument_group("profile")
    g.add_argument("--profile", default=None, help="profile record as JSON text or a JSON file")
    g.add_argument("--family", choices=profiles.FAMILIES, default="power")
    g.add_argument(alpha_flag, dest="profile_alpha", type=_num, default=0.0)
    g.add_argument("--c", type=_num, default=1.0)
    g.add_argument("--p", type=_num, default=0.5)
    g.add_argument("--table", default=None, help="two-column CSV z,f")
    g.add_argument("--z-floor", type=_num, default=None)


def _add_bound_params(p):
    g = p.add_argument_group("bound constants")
    g.add_argument("--params", default=None, help="BoundParams record as JSON text or file")
    for name, f in exact.BoundParams.__dataclass_fields__.items():
        g.add_argument("--" + name.replace("_", "-"), dest="bp_" + name,
                       type=int if name == "k0" else _num, default=None)


def _load_json(text_or_path: str) -> dict:
    if os.path.exists(text_or_path):
        with open(text_or_path) as fh:
            return json.load(fh)
    try:
        return json.loads(text_or_path)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"not JSON and not a file: {text_or_path!r}") from exc


def profile_from_args(a) -> ThornProfile:
    if a.profile:
        return ThornProfile.from_config(_load_json(a.profile))
    rec = {"family": a.family, "z_floor": a.z_floor}
    if a.family == "power":
        rec["alpha"] = a.profile_alpha
    elif a.family == "subexp":
        rec.update(c=a.c, p=a.p)
    else:
        if not a.table:
            raise ConfigError("--family tabulated needs --table")
        rec["table_path"] = a.table
    return ThornProfile.from_config(rec)


def params_from_args(a) -> exact.BoundParams:
    rec = _load_json(a.params) if a.params else {}
    for name in exact.BoundParams.__dataclass_fields__:
        v = getattr(a, "bp_" + name)
        if v is not None:
            rec[name] = v
    return exact.BoundParams.from_dict(rec)


def sim_from_args(a) -> SimConfig:
    return SimConfig(seed=a.seed, n_paths=a.n, eps_shell=a.eps, dt_factor=a.dt_factor,
                     max_steps=a.max_steps, threads=a.threads)


# subcommands ----------------------------------------------------------------------

def cmd_profile(a, emit):
    prof = profile_from_args(a)
    if a.action == "check":
        rep = profiles.check_hypotheses(prof, a.z_lo, a.z_hi, a.grid, strict=a.strict)
        emit({"quantity": "hypotheses", "profile": prof.label, "ok": rep.ok, "provenance": "formula",
              "exact": True, **rep.to_dict()})
    elif a.action == "eval":
        for z in a.z:
            emit(exact_record("f", float(profiles.eval_f(prof, z)), z=z, profile=prof.label))
            emit(exact_record("g", float(profiles.eval_g(prof, z)), z=z, profile=prof.label))
    else:
        res = profiles.integral_test(prof, a.z_min, a.z_max, a.grid)
        emit(exact_record("integral_test", res.partial, verdict=res.verdict,
                          tail_exponent=res.tail_exponent, profile=prof.label,
                          z_range=[a.z_min, a.z_max]))


def cmd_estimate(a, emit):
    cfg = sim_from_args(a)
    w = a.what
    if w in ("q", "q2", "U"):
        prof = profile_from_args(a)
        if w == "q":
            e = sampler.estimate_q(prof, a.L, a.clipped, cfg, a.inner_radius)
        elif w == "q2":
            e = sampler.estimate_q2(prof, a.L, a.theta, a.clipped, cfg, a.inner_radius)
        else:
            e = sampler.estimate_U(prof, a.L, a.theta, cfg, a.clipped, a.inner_radius)
        emit(est_record(e))
    elif w == "escape":
        dom = domain_from_config(_load_json(a.scene)) if a.scene else Domain(a.L, [])
        e = sampler.wos_escape_prob(dom, cfg.with_(start=a.start))
        emit(est_record(e, "escape"))
    elif w == "radial":
        v1, v2, v3 = a.v
        e = sampler.radial_hit_mc(v1, v2, v3, cfg)
        emit(est_record(e, "radial_hit", exact=exact.radial_hit_prob(v1, v2, v3)))
    elif w == "occupation":
        dom = domain_from_config(_load_json(a.scene)) if a.scene else Domain(a.L, [])
        e = sampler.occupation_density(dom, a.probe, a.ball_r, cfg.with_(start=a.start))
        free = exact.free_green(a.start, a.probe)
        emit(est_record(e, "occupation_density", free_green=free))
    elif w == "polar":
        prof = profile_from_args(a)
        obst = [] if a.no_thorn else [ThornSet(prof, Z_AXIS, a.inner_radius,
                                               a.L / 2 if a.clipped else None)]
        h = sampler.hitting_density_polar(Domain(a.L, obst), a.bins, cfg, fold=not a.unfolded)
        iso = sampler.isotonic_check(h["density"], h["stderr"])
        emit({"quantity": "polar_density", "provenance": "MC", "seed": h["seed"], "n": h["n"],
              "value": h["density"], "stderr": h["stderr"], "theta_edges": h["theta_edges"],
              "escaped": h["escaped"], "isotonic_chi2": iso["chi2"], "chi2_threshold": iso["threshold"],
              "nondecreasing": iso["passed"], "flags": h["flags"]})
        if a.csv:
            te = h["theta_edges"]
            _write_csv(a.csv, ["theta_lo", "theta_hi", "density", "stderr", "count"],
                       zip(te[:-1], te[1:], h["density"], h["stderr"], h["counts"]))
    elif w == "ccyl":
        e = sampler.estimate_c_cyl(cfg)
        emit(est_record(e, "c_cyl"))
        if a.b:
            per = sampler.cyl_escape_mc(a.b, cfg)
            worst = max(per, key=lambda x: x.mean)
            emit(est_record(worst, "cyl_escape", bound=e.mean ** a.b,
                            holds=bool(worst.mean <= e.mean ** a.b + 3 * worst.stderr)))
    elif w == "cylavoid":
        cur = sampler.cylinder_avoid_curve(a.r, cfg)
        for s, ests in cur["estimates"].items():
            for r, e in zip(cur["radii"], ests):
                emit(est_record(e, "cylinder_avoid", K_proxy=(1 - e.mean) * abs(math.log(r))))
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigError(w)


def cmd_wl(a, emit):
    cfg = sim_from_args(a)
    prof = profile_from_args(a)
    grid = moments.DirectionGrid.fibonacci(a.grid)
    res = moments.sample_WL(prof, a.L, grid, cfg, inner_radius=a.inner_radius)
    b = moments.second_moment_bound(res.EW, res.EW2, res.W[:, -1])
    for e in (res.EW, res.EW2, res.q, res.fubini, res.positive):
        emit(est_record(e))
    emit(est_record(b, "second_moment_bound", positive_fraction=res.positive.mean,
                    holds=bool(res.positive.mean >= b.mean - 3 * math.hypot(b.stderr, res.positive.stderr))))


def cmd_green(a, emit):
    if a.what == "concentric":
        r = greencheck.clean_green_concentric(a.a, a.aprime, a.y, a.L)
        emit(exact_record("clean_green_concentric", r["rhs"], **{k: v for k, v in r.items()
                                                                 if k not in ("provenance",)}))
        return
    cfg = sim_from_args(a)
    if a.what == "balls":
        r = greencheck.clean_green_balls_mc(a.c1, a.r1, a.c2, a.r2, a.L, cfg, n_points=a.points,
                                            m_fd=a.m_fd)
        for k in ("lhs", "rhs", "h1", "h2", "correction"):
            emit(est_record(r[k], k))
        tol = max(0.05 * abs(r["lhs"].mean), 3 * r["diff_stderr"])
        emit({"quantity": "lhs - rhs", "value": r["diff"], "stderr": r["diff_stderr"], "provenance": "MC",
              "seed": cfg.seed, "holds": bool(abs(r["diff"]) <= tol), "flags": r["flags"]})
    else:
        prof = profile_from_args(a)
        r = greencheck.lemma_substitute_check(prof, a.L, a.theta, cfg, a.inner_radius)
        rec = {"quantity": "substitute", "status": r["status"], "holds": r["holds"],
               "lhs": est_record(r["lhs"]), "rhs": est_record(r["rhs"]) if r["rhs"] else None,
               "provenance": "MC", "seed": cfg.seed, "flags": []}
        if r["status"] == "irregular":
            rec["flags"] = ["irregular"]
        emit(rec)


def cmd_dimint(a, emit):
    th, U = [], []
    with open(a.table, newline="") as fh:
        rd = csv.DictReader(fh)
        for row in rd:
            th.append(float(row["theta"]))
            U.append(float(row["U"]))
    r = moments.dimension_integral(th, U, a.beta)
    emit(exact_record("dimension_integral", r["value"], **{k: v for k, v in r.items() if k != "value"}))


def cmd_axisint(a, emit):
    prof = profile_from_args(a)
    for th in a.theta:
        r = moments.axis_integral(prof, a.s, th)
        emit(exact_record("axis_integral", r["value"], profile=prof.label,
                          **{k: v for k, v in r.items() if k != "value"}))


def cmd_bounds(a, emit):
    P = params_from_args(a)
    w = a.what
    if w == "ladder":
        for k in (range(P.k0, a.k + 1) if a.all else [a.k]):
            emit(exact_record("ladder", None, **exact.ladder(P, k).to_dict()))
    elif w == "qL":
        log_L = a.log_L if a.log_L is not None else math.log(a.L)
        emit(exact_record("log_qL_lower_bound", exact.qL_lower_bound(P, log_L), log_L=log_L,
                          j=exact.j_of_L(P, log_L)))
    elif w == "U":
        for th in a.theta:
            v, clamped = exact.U_upper_bound_power(P, th)
            emit(exact_record("U_upper_bound", v, theta=th, clamped=clamped))
    elif w == "cyl":
        emit(exact_record("cyl_escape_bound", exact.cyl_escape_bound(P, a.a, a.b), a=a.a, b=a.b))
    elif w == "radial":
        emit(exact_record("radial_hit_prob", exact.radial_hit_prob(*a.v), v=a.v))
    elif w == "sphere":
        emit(exact_record("sphere_escape_prob", exact.sphere_escape_prob(*a.v), v=a.v))
    elif w == "utheta":
        prof = profile_from_args(a)
        emit(exact_record("u_theta", exact.u_theta_solution(P, prof, a.theta[0], a.R, a.L),
                          theta=a.theta[0], R=a.R, L=a.L, profile=prof.label))
    elif w == "green":
        emit(exact_record("free_green", exact.free_green(a.x, a.y), x=a.x, y=a.y))
    else:
        th = a.theta[0]
        emit(exact_record("k1", None, theta=th, k1_small=exact.k1_small(P, th), k1_large=exact.k1_large(th)))
    emit({"quantity": "params", "provenance": "input", "value": P.to_dict()})


def cmd_converse(a, emit):
    if a.what == "bound":
        P = params_from_args(a)
        r = exact.converse_q_bound(P, a.k, a.g_alpha)
        emit(exact_record("converse_log_q_bound", r["log_bound"], **r))
        return
    cfg = sim_from_args(a)
    cur = sampler.cylinder_avoid_curve(a.r, cfg)
    for s, ests in cur["estimates"].items():
        K = [(1 - e.mean) * abs(math.log(r)) for r, e in zip(cur["radii"], ests)]
        Kse = [e.stderr * abs(math.log(r)) for r, e in zip(cur["radii"], ests)]
        mean = float(np.mean(K))
        spread = (max(K) - min(K)) / mean if mean > 0 else math.inf
        emit({"quantity": "cylinder_avoid_fit", "start": list(s), "radii": cur["radii"],
              "value": K, "stderr": Kse, "avoid": [e.mean for e in ests],
              "relative_spread": spread, "within_20pct": bool(spread <= 0.2),
              "provenance": "MC", "seed": cfg.seed, "n": cfg.n_paths, "flags": []})


def _monotone_label(vals) -> str:
    d = np.diff(np.asarray(vals, dtype=float))
    if np.all(d >= 0):
        return "nondecreasing"
    if np.all(d <= 0):
        return "nonincreasing"
    return "none"


def cmd_scan(a, emit):
    cfg = sim_from_args(a)
    prof = profile_from_args(a)
    thetas = sorted(a.theta)
    col, err = [], []
    for i, th in enumerate(thetas):
        if a.what == "q2":
            e = sampler.estimate_q2(prof, a.L, th, a.clipped, cfg, a.inner_radius)
        elif a.what == "U":
            e = sampler.estimate_U(prof, a.L, th, cfg, a.clipped, a.inner_radius, check_regular=False)
        else:
            r = moments.axis_integral(prof, a.s, th)
            e = None
        if e is not None:
            emit(est_record(e, a.what, index=i, theta=th))
            col.append(e.mean)
            err.append(e.stderr)
        else:
            emit(exact_record("axis_integral", r["value"], index=i, theta=th, s=a.s))
            col.append(r["value"])
    emit({"quantity": "scan_summary", "scanned": a.what, "theta": thetas, "value": col,
          "stderr": err or None, "monotone_in_theta": _monotone_label(col),
          "provenance": "formula" if a.what == "axisint" else "MC", "seed": cfg.seed})


# parser -----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="thornwalk", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"thornwalk {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("profile", help="profile checks and the integral test")
    p.add_argument("action", choices=["check", "eval", "integral"])
    _add_profile(p)
    _add_common(p)
    p.add_argument("--z-lo", type=_num, default=1.0)
    p.add_argument("--z-hi", type=_num, default=1e6)
    p.add_argument("--z-min", type=_num, default=10.0)
    p.add_argument("--z-max", type=_num, default=1e12)
    p.add_argument("--grid", type=int, default=64)
    p.add_argument("--strict", action="store_true", help="also require g(1) >= 2")
    p.add_argument("--z", type=_numlist, default=[1.0])
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("estimate", help="Monte-Carlo estimates")
    p.add_argument("what", choices=["q", "q2", "U", "escape", "radial", "occupation", "polar", "ccyl",
                                    "cylavoid"])
    _add_profile(p)
    _add_common(p)
    p.add_argument("--L", type=_num, default=20.0)
    p.add_argument("--theta", type=_num, default=math.pi / 2)
    p.add_argument("--clipped", action="store_true")
    p.add_argument("--inner-radius", type=_num, default=sampler.DEFAULT_INNER_RADIUS)
    p.add_argument("--scene", default=None, help="domain record as JSON text or file")
    p.add_argument("--start", type=_point, default=(0.0, 0.0, 0.0))
    p.add_argument("--probe", type=_point, default=(2.0, 0.0, 0.0))
    p.add_argument("--ball-r", type=_num, default=0.25)
    p.add_argument("--bins", type=int, default=8)
    p.add_argument("--unfolded", action="store_true")
    p.add_argument("--no-thorn", action="store_true")
    p.add_argument("--csv", default=None, help="per-bin CSV output for polar")
    p.add_argument("--v", type=_numlist, default=[1.0, 2.0, 4.0])
    p.add_argument("--b", type=_num, default=None, help="also check the slab bound at this half-width")
    p.add_argument("--r", type=_numlist, default=[1e-2, 1e-3, 1e-4, 1e-5])
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("wl", help="direction measure W_L and the moment bound")
    _add_profile(p)
    _add_common(p)
    p.add_argument("--L", type=_num, default=20.0)
    p.add_argument("--grid", type=int, default=512)
    p.add_argument("--inner-radius", type=_num, default=sampler.DEFAULT_INNER_RADIUS)
    p.set_defaults(func=cmd_wl)

    p = sub.add_parser("green", help="two-set avoidance identity")
    p.add_argument("what", choices=["concentric", "balls", "substitute"])
    _add_profile(p)
    _add_common(p)
    p.add_argument("--a", type=_num, default=1.0)
    p.add_argument("--aprime", type=_num, default=2.0)
    p.add_argument("--y", type=_num, default=3.0)
    p.add_argument("--L", type=_num, default=8.0)
    p.add_argument("--c1", type=_point, default=(0.0, 0.0, 4.0))
    p.add_argument("--r1", type=_num, default=1.0)
    p.add_argument("--c2", type=_point, default=(0.0, 0.0, -4.0))
    p.add_argument("--r2", type=_num, default=1.0)
    p.add_argument("--points", type=int, default=2048)
    p.add_argument("--m-fd", type=int, default=512)
    p.add_argument("--theta", type=_num, default=math.pi / 2)
    p.add_argument("--inner-radius", type=_num, default=sampler.DEFAULT_INNER_RADIUS)
    p.set_defaults(func=cmd_green)

    p = sub.add_parser("dimint", help="direction integral of a tabulated U")
    _add_common(p)
    p.add_argument("--table", required=True, help="CSV with columns theta,U[,stderr]")
    p.add_argument("--beta", type=_num, required=True)
    p.set_defaults(func=cmd_dimint)

    p = sub.add_parser("axisint", help="integral of 1/(r r') over the s-sphere minus thorn caps")
    _add_profile(p)
    _add_common(p)
    p.add_argument("--s", type=_num, required=True)
    p.add_argument("--theta", type=_numlist, required=True)
    p.set_defaults(func=cmd_axisint)

    p = sub.add_parser("bounds", help="closed-form laws and bound evaluators")
    p.add_argument("what", choices=["ladder", "qL", "U", "cyl", "radial", "sphere", "utheta", "green", "k1"])
    _add_bound_params(p)
    _add_profile(p, alpha_flag="--profile-alpha")
    _add_common(p)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--all", action="store_true", help="ladder rows k0..k")
    p.add_argument("--L", type=_num, default=100.0)
    p.add_argument("--log-L", type=_num, default=None)
    p.add_argument("--R", type=_num, default=math.e)
    p.add_argument("--theta", type=_numlist, default=[0.1])
    p.add_argument("--a", type=_num, default=1.0)
    p.add_argument("--b", type=_num, default=2.0)
    p.add_argument("--v", type=_numlist, default=[1.0, 2.0, 4.0])
    p.add_argument("--x", type=_point, default=(0.0, 0.0, 0.0))
    p.add_argument("--y", type=_point, default=(1.0, 0.0, 0.0))
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("converse", help="cylinder-product bound and the thin-cylinder fit")
    p.add_argument("what", choices=["bound", "fit"])
    _add_bound_params(p)
    _add_common(p)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--g-alpha", type=_num, default=None, help="exponent of g = exp(a log^(1/2) z)")
    p.add_argument("--r", type=_numlist, default=[1e-2, 1e-3, 1e-4, 1e-5])
    p.set_defaults(func=cmd_converse)

    p = sub.add_parser("scan", help="scan q2, U or the axis integral over angles")
    p.add_argument("what", choices=["q2", "U", "axisint"])
    _add_profile(p)
    _add_common(p)
    p.add_argument("--L", type=_num, default=20.0)
    p.add_argument("--s", type=_num, default=100.0)
    p.add_argument("--theta", type=_numlist, default=[math.pi / 8, math.pi / 4, math.pi / 2])
    p.add_argument("--clipped", action="store_true")
    p.add_argument("--inner-radius", type=_num, default=sampler.DEFAULT_INNER_RADIUS)
    p.set_defaults(func=cmd_scan)
    return ap


def _apply_config(ap, args):
    if not args.config:
        return args
    rec = _load_json(args.config)
    for k, v in rec.items():
        dest = k.replace("-", "_")
        if not hasattr(args, dest):
            raise ConfigError(f"unknown config key {k!r}")
        setattr(args, dest, v)
    return args


def _inconclusive(records) -> bool:
    for r in records:
        if "inconclusive" in (r.get("flags") or []):
            return True
    return False


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    t0 = time.time()
    ap = build_parser()
    args = None
    code = EXIT_OK
    emit = Emitter(None)
    error = None
    try:
        args = ap.parse_args(argv)
        args = _apply_config(ap, args)
        emit.out = args.out
        args.func(args, emit)
        if _inconclusive(emit.records):
            code = EXIT_INCONCLUSIVE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except ConfigError as exc:
        error, code = str(exc), EXIT_CONFIG
    except InsufficientSignal as exc:
        error, code = str(exc), EXIT_INCONCLUSIVE
    except (DomainError, ValueError, KeyError, OSError) as exc:
        error, code = f"{type(exc).__name__}: {exc}", EXIT_CONFIG
    if error:
        print(f"thornwalk: error: {error}", file=sys.stderr)
    else:
        emit.flush()
    _write_manifest(args, argv, emit, code, error, time.time() - t0)
    return code


def _write_manifest(args, argv, emit, code, error, wall):
    if args is not None and args.manifest:
        path = args.manifest
    elif args is not None and args.out:
        path = args.out + ".manifest.json"
    else:
        path = "thornwalk_manifest.json"
    config = {}
    if args is not None:
        config = {k: v for k, v in vars(args).items() if k != "func"}
    man = {"argv": argv, "config": _jsonable(config), "seed": config.get("seed"),
           "version": __version__, "backend": backend(), "wall_time_s": wall, "exit_code": code,
           "error": error, "records": emit.records}
    try:
        with open(path, "w") as fh:
            json.dump(man, fh, sort_keys=True, indent=1)
    except OSError as exc:
        print(f"thornwalk: could not write manifest {path}: {exc}", file=sys.stderr)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
