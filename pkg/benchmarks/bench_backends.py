"""Compare the numba kernels with the pure-numpy fallback.

Each case runs in a fresh interpreter per backend (the backend is fixed at
import time by THORNWALK_BACKEND).  Numba timings exclude compilation: the
case runs once to warm up, then ``--repeat`` timed runs follow.

    python3 benchmarks/bench_backends.py [--scale 1.0] [--repeat 3] [--json out.json]
"""

import argparse
import json
import os
import subprocess
import sys
import textwrap

CASES = {
    "wos_shell": """
        from thornwalk.geometry import Ball, Domain
        from thornwalk.sampler import SimConfig, wos_escape_prob
        dom = Domain(4.0, [Ball((0.0, 0.0, 0.0), 1.0)])
        cfg = SimConfig(seed=1, n_paths=int(20000 * SCALE), start=(2.0, 0.0, 0.0))
        def work():
            return wos_escape_prob(dom, cfg).mean
    """,
    "wos_thorn": """
        from thornwalk.profiles import ThornProfile
        from thornwalk.sampler import SimConfig, estimate_q
        prof = ThornProfile.power(0.0)
        cfg = SimConfig(seed=1, n_paths=int(5000 * SCALE))
        def work():
            return estimate_q(prof, 20.0, False, cfg).mean
    """,
    "dist_points": """
        import numpy as np
        from thornwalk.geometry import ThornSet, distance_lower_bound
        from thornwalk.profiles import ThornProfile
        t = ThornSet(ThornProfile.power(0.5))
        pts = np.random.default_rng(0).uniform(-20, 20, size=(int(20000 * SCALE), 3))
        def work():
            return float(np.sum(distance_lower_bound(t, pts)))
    """,
    "em_shell": """
        from thornwalk.geometry import Ball, Domain
        from thornwalk.sampler import SimConfig, em_escape_prob
        dom = Domain(4.0, [Ball((0.0, 0.0, 0.0), 1.0)])
        cfg = SimConfig(seed=1, n_paths=int(500 * SCALE), start=(2.0, 0.0, 0.0))
        def work():
            return em_escape_prob(dom, cfg).mean
    """,
    "wl_grid": """
        from thornwalk.moments import DirectionGrid, sample_WL
        from thornwalk.profiles import ThornProfile
        from thornwalk.sampler import SimConfig
        grid = DirectionGrid.fibonacci(64)
        cfg = SimConfig(seed=1, n_paths=int(50 * SCALE))
        def work():
            return sample_WL(ThornProfile.power(0.0), 10.0, grid, cfg).EW.mean
    """,
}

DRIVER = """
import json, time
SCALE = {scale}
{body}
work()
times = []
for _ in range({repeat}):
    t0 = time.perf_counter()
    val = work()
    times.append(time.perf_counter() - t0)
print(json.dumps({{"best": min(times), "value": val}}))
"""


def run_case(name: str, backend: str, scale: float, repeat: int) -> dict:
    src = DRIVER.format(scale=scale, body=textwrap.dedent(CASES[name]), repeat=repeat)
    env = dict(os.environ, THORNWALK_BACKEND=backend)
    out = subprocess.run([sys.executable, "-c", src], env=env, capture_output=True, text=True)
    if out.returncode != 0:
        raise RuntimeError(f"{name}/{backend} failed:\n{out.stderr}")
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--scale", type=float, default=1.0, help="multiply the workload sizes")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--cases", default=",".join(CASES))
    ap.add_argument("--json", default=None, help="also write the table here")
    args = ap.parse_args(argv)

    rows = []
    print(f"{'case':<12} {'numba s':>10} {'numpy s':>10} {'speedup':>8}  values")
    for name in args.cases.split(","):
        nb = run_case(name, "numba", args.scale, args.repeat)
        npy = run_case(name, "numpy", args.scale, args.repeat)
        sp = npy["best"] / nb["best"] if nb["best"] > 0 else float("inf")
        rows.append({"case": name, "numba": nb, "numpy": npy, "speedup": sp})
        print(f"{name:<12} {nb['best']:>10.4f} {npy['best']:>10.4f} {sp:>8.1f}  "
              f"{nb['value']:.5g} / {npy['value']:.5g}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=1)


if __name__ == "__main__":
    main()
