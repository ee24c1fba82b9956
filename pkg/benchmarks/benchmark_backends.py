#!/usr/bin/env python3
"""Compare the numba kernels against the pure-numpy fallback.

Runs the w1 and w2 ensemble kernels on representative shapes under both
backends, checks that the outputs agree, and prints a timing table.

    python benchmarks/benchmark_backends.py [--paths 20000] [--steps 200]
"""

import argparse
import time

import numpy as np

from hubbard_sde.kernels import get_backend
from hubbard_sde.lattice import build_lattice, hopping_matrix

SHAPES = [
    ("2x2 open", 2, 2, "open"),
    ("3x2 open", [3, 2], 2, "open"),
    ("4x4 periodic", 4, 2, "periodic"),
]


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--u", type=float, default=2.0)
    args = ap.parse_args()

    backends = {}
    for name in ("numba", "numpy"):
        try:
            backends[name] = get_backend(name)[1]
        except ImportError:
            print(f"backend {name} unavailable, skipping")

    print(f"{args.paths} paths x {args.steps} steps, u={args.u}, dt=0.01\n")
    header = f"{'shape':<14}{'kernel':<6}" + "".join(f"{b:>12}" for b in backends)
    print(header + f"{'speedup':>10}{'max|diff|':>12}")
    for label, L, d, boundary in SHAPES:
        spec = build_lattice(L, d, boundary)
        eps = hopping_matrix(spec, -1.0)
        for kernel in ("w1", "w2"):
            times = {}
            outs = {}
            for bname, mod in backends.items():
                fn = getattr(mod, f"evolve_{kernel}_ensemble")
                fn(eps, args.u, 0.01, 2, [2], seed=1, path0=0, n_paths=64)  # warm
                t0 = time.time()
                outs[bname] = fn(eps, args.u, 0.01, args.steps, [args.steps],
                                 seed=1, path0=0, n_paths=args.paths)
                times[bname] = time.time() - t0
            row = f"{label:<14}{kernel:<6}" + "".join(
                f"{times[b]:>11.2f}s" for b in backends)
            if len(backends) == 2:
                diff = max(np.nanmax(np.abs(outs["numba"][k] - outs["numpy"][k]))
                           for k in ("W", "S"))
                row += f"{times['numpy'] / times['numba']:>9.1f}x{diff:>12.1e}"
            print(row)


if __name__ == "__main__":
    main()
