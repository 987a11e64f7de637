"""Compare the numba kernels with their pure-numpy fallbacks.

    python benchmarks/bench_kernels.py [--n 1000000] [--repeat 5]

Both paths are timed in the same process (the first numba call is reported
separately as compile time) and their outputs are compared.
"""

import argparse
import time

import numpy as np

from ssprofile import _kernels, demo
from ssprofile.continuation import characteristic_scales, extend_global
from ssprofile.expander import picard_solve


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def bench_recurrence(n, repeat):
    rng = np.random.default_rng(0)
    dl = rng.uniform(0.0, 1e-3, n)
    s = rng.normal(size=n)
    t = time.perf_counter()
    _kernels.linear_recurrence(dl[:10], s[:10], 0.0, use_numba=True)
    compile_s = time.perf_counter() - t
    t_jit, a = best_of(lambda: _kernels.linear_recurrence(dl, s, 1.0, use_numba=True), repeat)
    t_np, b = best_of(lambda: _kernels.linear_recurrence(dl, s, 1.0, use_numba=False), repeat)
    err = float(np.max(np.abs(a - b)) / np.max(np.abs(a)))
    return "linear_recurrence", n, compile_s, t_jit, t_np, err


def bench_integrator(repeat):
    params, bd = demo.EXPANDER_PARAMS, demo.EXPANDER_BOUNDARY
    grid = demo.expander_grid()
    inner, _ = picard_solve(params, bd, grid)
    t = time.perf_counter()
    extend_global(inner, params, bd, outer_nodes=grid.outer[:64], use_numba=True)
    compile_s = time.perf_counter() - t

    def run(flag):
        return extend_global(inner, params, bd, outer_nodes=grid.outer, use_numba=flag)

    t_jit, a = best_of(lambda: run(True), repeat)
    t_np, b = best_of(lambda: run(False), max(1, repeat // 2))
    scale = characteristic_scales(bd, grid.r_max)
    err = max(float(np.max(np.abs(a.u - b.u))) / scale[1],
              float(np.max(np.abs(a.theta - b.theta))) / scale[3])
    return "integrate_expander", len(grid.outer), compile_s, t_jit, t_np, err


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _kernels._HAVE_NUMBA:
        print("numba is not importable; only the numpy path exists")
        return
    rows = [bench_recurrence(args.n, args.repeat), bench_integrator(args.repeat)]
    print(f"{'kernel':<20}{'size':>9}{'compile s':>11}{'numba s':>10}{'numpy s':>10}"
          f"{'speedup':>9}{'rel diff':>11}")
    for name, size, comp, tj, tn, err in rows:
        print(f"{name:<20}{size:>9}{comp:>11.3f}{tj:>10.4f}{tn:>10.4f}{tn / tj:>9.1f}"
              f"{err:>11.2e}")


if __name__ == "__main__":
    main()
