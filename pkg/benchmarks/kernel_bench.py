"""Throughput comparison of the two ball enumerators.

Drains the same lexicographic candidate enumeration through the
pure-Python kernel and, when the extension built, the compiled one,
then reports rows per second:

    python3 benchmarks/kernel_bench.py --features 10 --width 3
"""

import argparse
import time

from dxplain._ballenum_py import BallEnumerator as PureKernel

try:
    from dxplain._ballenum import BallEnumerator as CompiledKernel
except ImportError:
    CompiledKernel = None


def drain(kernel, base, positions, values, costs, budget, chunk):
    enum = kernel(base, positions, values, costs, budget)
    rows = 0
    while True:
        block = enum.next_chunk(chunk)
        if block is None:
            return rows
        rows += len(block)


def measure(kernel, args):
    base = [0.0] * args.features
    positions = list(range(args.features))
    levels = [0.5 * i for i in range(args.width)]
    values = [levels] * args.features
    costs = [[abs(v) for v in levels]] * args.features
    # budget admits most of the grid without degenerating to all of it
    budget = 0.35 * args.features * levels[-1]
    best, rows = None, 0
    for _ in range(args.repeats):
        t0 = time.perf_counter()
        rows = drain(kernel, base, positions, values, costs, budget,
                     args.chunk)
        elapsed = time.perf_counter() - t0
        best = elapsed if best is None else min(best, elapsed)
    return rows, best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--features", type=int, default=10)
    parser.add_argument("--width", type=int, default=3,
                        help="values per feature")
    parser.add_argument("--chunk", type=int, default=2048)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rows, pure_t = measure(PureKernel, args)
    print("workload: %d features x %d values, %d candidate rows"
          % (args.features, args.width, rows))
    print("pure-python: %8.4fs  (%.0f rows/s)" % (pure_t, rows / pure_t))
    if CompiledKernel is None:
        print("compiled kernel not built; set it up with pip install -e .")
        return 0
    c_rows, compiled_t = measure(CompiledKernel, args)
    assert c_rows == rows, "kernels disagree on the candidate count"
    print("compiled:    %8.4fs  (%.0f rows/s)  %.1fx"
          % (compiled_t, rows / compiled_t, pure_t / compiled_t))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
