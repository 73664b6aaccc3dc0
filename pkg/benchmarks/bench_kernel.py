"""Compare the numba kernel with the pure-Python fallback.

    python benchmarks/bench_kernel.py [--slots N] [--fallback-slots N]

The fallback runs in a subprocess with HYBRIDCR_DISABLE_NUMBA=1.  Both paths
share the same uniforms, so the final counters must match exactly.
"""

import argparse
import json
import os
import subprocess
import sys
import time

CHILD = """
import json, sys, time
from hybridcr import _jit
from hybridcr.experiment import ExperimentConfig
from hybridcr.sim import Mode, RunConfig, run
slots, warm = int(sys.argv[1]), int(sys.argv[2])
cfg = ExperimentConfig(); model, table = cfg.build(); o = cfg.outage()
def once(n):
    return run(RunConfig(Mode.HYBRID, 0.5, cfg.links(0.2), model, table, o.rho_p, o.rho_s, n, 123))
if warm:
    once(100)
t0 = time.perf_counter()
m = once(slots)
dt = time.perf_counter() - t0
print(json.dumps({"numba": _jit.NUMBA_ENABLED, "seconds": dt,
                  "counters": m.final_state.counters.tolist()}))
"""


def measure(slots, disable):
    env = dict(os.environ)
    if disable:
        env["HYBRIDCR_DISABLE_NUMBA"] = "1"
    else:
        env.pop("HYBRIDCR_DISABLE_NUMBA", None)
    out = subprocess.run([sys.executable, "-c", CHILD, str(slots), "1"],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--slots", type=int, default=2_000_000)
    ap.add_argument("--fallback-slots", type=int, default=50_000)
    args = ap.parse_args()

    fast = measure(args.slots, disable=False)
    slow = measure(args.fallback_slots, disable=True)
    check_fast = measure(args.fallback_slots, disable=False)

    for name, r, n in (("numba", fast, args.slots), ("fallback", slow, args.fallback_slots)):
        print(f"{name:9s} numba={r['numba']!s:5s} {n:>9d} slots  {r['seconds']:8.3f} s  "
              f"{r['seconds'] / n * 1e9:10.1f} ns/slot")
    speedup = (slow["seconds"] / args.fallback_slots) / (fast["seconds"] / args.slots)
    print(f"speedup   {speedup:.0f}x")
    same = check_fast["counters"] == slow["counters"]
    print(f"identical counters over {args.fallback_slots} slots: {same}")
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
