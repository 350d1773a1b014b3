#!/usr/bin/env python3
"""Compiled vs plain-Python kernels on representative runs.

Each case runs in a child process, once with the numba kernels and once with
BLOWUP_PROFILES_PURE=1, and reports the best-of-N wall time plus the
terminal event location so the two paths can be checked against each other.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--json out.json]
"""
import argparse
import json
import os
import subprocess
import sys

CASES = {
    # backward Dormand-Prince run on the profile ODE, explicit profile
    "backward_profile_dopri": """
from blowup_profiles.model import Params, sigma_star, explicit_support_edge
from blowup_profiles.shooting import shoot_from_interface, ShootingControl
p = Params(3.0, sigma_star(3.0))
eta = explicit_support_edge(3.0)
ctrl = ShootingControl(certify=False)
def run():
    o = shoot_from_interface(p, eta, ctrl)
    return o.trajectory.termination.location, len(o.trajectory)
""",
    # forward tail shot: Rosenbrock stretch along X ~ 0
    "forward_tail_rosenbrock": """
from blowup_profiles.model import Params
from blowup_profiles.shooting import shoot_from_origin
p = Params(3.0, 2.0)
def run():
    o = shoot_from_origin(p, 1.0)
    return o.trajectory.termination.location, len(o.trajectory)
""",
    # orbit out of P2 along the explicit line, phase system in log coordinates
    "p2_orbit_phase": """
from blowup_profiles.model import Params, sigma_star
from blowup_profiles.shooting import shoot_from_p2
p = Params(3.0, sigma_star(3.0))
def run():
    o = shoot_from_p2(p)
    return o.trajectory.termination.location, len(o.trajectory)
""",
}

DRIVER = """
import json, sys, time
{setup}
run()  # warm-up (compilation or cache load)
best = float("inf")
for _ in range({repeat}):
    t0 = time.perf_counter()
    loc, n = run()
    best = min(best, time.perf_counter() - t0)
from blowup_profiles import _kernels
print(json.dumps({{"seconds": best, "location": loc, "samples": n, "numba": _kernels.USE_NUMBA}}))
"""


def run_case(name, setup, repeat, pure):
    env = dict(os.environ)
    if pure:
        env["BLOWUP_PROFILES_PURE"] = "1"
    else:
        env.pop("BLOWUP_PROFILES_PURE", None)
    code = DRIVER.format(setup=setup, repeat=repeat)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", type=str)
    ap.add_argument("--case", choices=sorted(CASES), action="append")
    args = ap.parse_args(argv)
    results = {}
    print(f"{'case':28s} {'numba [s]':>11s} {'pure [s]':>11s} {'speedup':>8s} {'rel d loc':>10s}")
    for name in args.case or CASES:
        fast = run_case(name, CASES[name], args.repeat, pure=False)
        slow = run_case(name, CASES[name], max(1, args.repeat // 3), pure=True)
        # eta grows without bound along tails, so compare relatively
        dloc = abs(fast["location"] - slow["location"]) / max(abs(fast["location"]), 1.0)
        speed = slow["seconds"] / fast["seconds"]
        results[name] = {"numba": fast, "pure": slow, "speedup": speed, "location_rel_diff": dloc}
        print(f"{name:28s} {fast['seconds']:11.4f} {slow['seconds']:11.4f} {speed:8.1f} {dloc:10.2e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
