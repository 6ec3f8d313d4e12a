"""Compare the compiled kernels against the pure-Python fallback.

Kernel timings call both modules directly on the same inputs.  The end-to-end
timing runs an ECBS solve in a child process per backend, since the backend is
fixed when ``mapfsplit`` is first imported.

    python3 benchmarks/bench_backends.py --size 32 --agents 40 --repeat 5
"""
import argparse
import json
import os
import statistics
import subprocess
import sys
import time

import numpy as np

from mapfsplit import _pycore
from mapfsplit.instance import generate_random

try:
    from mapfsplit import _core
except ImportError:
    _core = None

E2E = """
import json, sys, time
from mapfsplit._backend import BACKEND
from mapfsplit.ecbs import Budget, solve
from mapfsplit.instance import generate_random
size, agents, seed = (int(x) for x in sys.argv[1:4])
inst = generate_random(size, size, 0.1, agents, seed=seed)
t = time.perf_counter()
res = solve(inst, "makespan", 1.5, Budget(time_limit=120))
print(json.dumps({"backend": BACKEND, "seconds": time.perf_counter() - t, "status": res.status}))
"""


def timeit(fn, repeat):
    runs = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        runs.append(time.perf_counter() - t)
    return statistics.median(runs)


def kernel_cases(mod, inst, rng):
    g = inst.graph
    adj = mod.prepare(g.neighbor_table)
    free = np.flatnonzero(~g.blocked.ravel())
    s_ids, t_ids = inst.start_ids(), inst.goal_ids()
    h = mod.prepare_h(g.distances_from_index(t_ids[0]).array)
    ds = g.distances_from_index(s_ids[0]).array.astype(np.int32)
    dg = g.distances_from_index(t_ids[0]).array.astype(np.int32)
    plen = int(dg[s_ids[0]])
    used = np.zeros(g.num_cells, dtype=np.uint8)
    used[rng.choice(free, free.size // 3, replace=False)] = 1
    paths = [[int(c) for c in rng.choice(free, 40)] for _ in range(inst.n)]
    horizon = 3 * g.num_cells
    return {
        "bfs": lambda: mod.bfs(adj, int(free[0])),
        "bfs_many": lambda: mod.bfs_many(adj, list(s_ids)),
        "annulus_candidates": lambda: mod.annulus_candidates(ds, dg, plen // 2, plen - plen // 2, used),
        "focal_search": lambda: mod.focal_search(adj, h, s_ids[0], t_ids[0], set(), set(), 0, horizon, 1.5, paths[1:]),
        "all_conflicts": lambda: mod.all_conflicts(paths),
    }


def end_to_end(backend, args):
    env = dict(os.environ, MAPFSPLIT_BACKEND=backend)
    out = subprocess.run(
        [sys.executable, "-c", E2E, str(args.size), str(args.agents), str(args.seed)],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(out.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=32)
    ap.add_argument("--agents", type=int, default=40)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--no-e2e", action="store_true", help="skip the end-to-end ECBS comparison")
    args = ap.parse_args(argv)

    if _core is None:
        print("compiled extension not built; only the Python kernels are available", file=sys.stderr)
        return 1
    inst = generate_random(args.size, args.size, 0.1, args.agents, seed=args.seed)
    py = kernel_cases(_pycore, inst, np.random.default_rng(args.seed))
    cc = kernel_cases(_core, inst, np.random.default_rng(args.seed))
    print(f"{'kernel':<20}{'python ms':>12}{'compiled ms':>14}{'speedup':>10}")
    for name in py:
        a, b = timeit(py[name], args.repeat), timeit(cc[name], args.repeat)
        print(f"{name:<20}{a * 1e3:>12.3f}{b * 1e3:>14.3f}{a / max(b, 1e-9):>9.1f}x")
    if not args.no_e2e:
        rows = {b: end_to_end(b, args) for b in ("python", "compiled")}
        a, b = rows["python"]["seconds"], rows["compiled"]["seconds"]
        print(f"\nECBS {args.size}x{args.size}, n={args.agents}: python {a:.2f}s, compiled {b:.2f}s "
              f"({a / max(b, 1e-9):.1f}x), status {rows['compiled']['status']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
