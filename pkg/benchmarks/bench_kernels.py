"""Compiled vs pure-Python kernels.

Times each built-in loss family and the block top-m selection on both
backends and prints the speed-up.  The default dispatch keeps the
lp-norm and geometric-mean families on numpy, whose vectorized power is
faster than the compiled per-element loop.  Usage::

    python benchmarks/bench_kernels.py [--rows 200000] [--dim 2] [--repeat 5]
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from implicit_extremes import kernels
from implicit_extremes.rng import RngStream


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=200_000)
    parser.add_argument("--dim", type=int, default=2)
    parser.add_argument("--block", type=int, default=1000, help="block size for top-m selection")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the pure backend is available")
    gen = RngStream(1).generator()
    x = np.exp(gen.normal(size=(args.rows, args.dim)))
    w = np.linspace(0.5, 2.0, args.dim)
    losses = gen.random((args.rows // args.block, args.block))

    cases = [
        (f"loss:{name}", lambda b, code=code: kernels.builtin_loss(code, x, w, 3.0, 1.0, backend=b))
        for name, code in sorted(kernels.KIND_CODES.items(), key=lambda kv: kv[1])
    ]
    cases += [
        (f"top-{m} of {args.block}", lambda b, m=m: kernels.block_top_m(losses, m, backend=b)) for m in (1, 2, 10)
    ]

    print(f"{'kernel':<24}" + "".join(f"{b:>12}" for b in backends) + ("   speed-up" if len(backends) > 1 else ""))
    for label, fn in cases:
        times = [best_of(lambda b=b: fn(b), args.repeat) for b in backends]
        row = f"{label:<24}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times)
        if len(times) > 1:
            row += f"{times[0] / times[1]:>10.1f}x"
        print(row)


    print()
    print("end to end: 2000 blocks of 2000 Pareto points, harmonic loss, top 2")
    for label, env in (("default", {}), ("pure", {"IMPLICIT_EXTREMES_PURE": "1"})):
        out = subprocess.run(
            [sys.executable, "-c", END_TO_END], env=dict(os.environ, **env), capture_output=True, text=True, check=True
        )
        print(f"  {label:<10}{out.stdout.strip()}")


END_TO_END = """
import time
from implicit_extremes import kernels
from implicit_extremes.geometry import harmonic
from implicit_extremes.implicit_sampling import block_implicit_maxima
from implicit_extremes.models import ParetoModel
from implicit_extremes.rng import RngStream
start = time.perf_counter()
block_implicit_maxima(ParetoModel((1.0, 1.0)), harmonic(2), 2000, 2000, 1.0, RngStream(1), top_m=2)
print(f"{kernels.BACKEND:<10}{time.perf_counter() - start:.2f} s")
"""


if __name__ == "__main__":
    main()
