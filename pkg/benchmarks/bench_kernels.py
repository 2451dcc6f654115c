"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--samples 1000] [--repeat 3]
"""

import argparse
import math
import sys
import timeit

import numpy as np

from hyreach import kernels
from hyreach.dynamics import EntryModel

DEG = math.pi / 180


def workloads(n_samples, rng):
    pvec = EntryModel().pvec
    x = np.array([71932.0, 7600.0, -0.1 * DEG, 0.0, 90 * DEG, 0.0])
    u = np.array([22.5 * DEG, -35 * DEG])
    X0 = x + rng.normal(scale=[200, 20, 1e-4, 1e-4, 1e-3, 1e-4], size=(n_samples, 6))
    U = np.tile(u, (n_samples, 12, 1))
    Useq = np.tile(u, (20, 1))
    return {
        "rates x1000": lambda k: [k.rates(x, u, pvec) for _ in range(1000)],
        "jacobian x1000": lambda k: [k.jacobian(x, u, pvec) for _ in range(1000)],
        f"rk4_batch {n_samples}x12x100": lambda k: k.rk4_batch(X0, U, 10.0, 100, pvec),
        "euler_rollout N=20 x1000": lambda k: [k.euler_rollout(x, Useq, 0.1, pvec) for _ in range(1000)],
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    compiled = kernels.compiled_kernels()
    backends = {"python": kernels.python_kernels}
    if compiled is None:
        print("compiled kernels not built; timing the python backend only", file=sys.stderr)
    else:
        backends["cython"] = compiled

    jobs = workloads(args.samples, np.random.default_rng(0))
    print(f"{'workload':32s}" + "".join(f"{b:>12s}" for b in backends) + ("     speedup" if compiled else ""))
    for name, job in jobs.items():
        times = {b: min(timeit.repeat(lambda: job(k), number=1, repeat=args.repeat)) for b, k in backends.items()}
        row = f"{name:32s}" + "".join(f"{t:11.4f}s" for t in times.values())
        if compiled:
            row += f"{times['python'] / times['cython']:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
