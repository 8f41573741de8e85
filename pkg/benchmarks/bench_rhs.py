"""Benchmark the hierarchy right-hand-side backends.

Times one RHS evaluation per (order, N) for the compiled kernels and the
vectorized numpy path, prints the table and the measured crossover, i.e. the
array size where BLAS-backed numpy overtakes the loop kernels.  Run with

    python benchmarks/bench_rhs.py [--orders 1,2,3] [--sizes 4,8,16,32,64]
"""

import argparse
import time

import numpy as np

import atomlight as al
from atomlight import cumulant
from atomlight.cumulant import backend, numpy_rhs


def build_problem(n, order, seed=0):
    arr = al.build_line_array(n, 0.3, [0, 0, 1], al.TransitionKind.DELTA_MPM1)
    cpl = al.coupling_set(arr)
    drv = al.plane_wave_drive(arr, 0.5, [1, 0, 0], 0.1)
    one = cumulant.build_one_atom_terms(drv)
    two = cumulant.build_two_atom_tensors(cpl)
    state = cumulant.HierarchyState(n, order)
    rng = np.random.default_rng(seed)
    state.data[:] = 0.1 * (rng.normal(size=state.data.shape)
                           + 1j * rng.normal(size=state.data.shape))
    return state, one, two


def time_call(fn, state, one, two, budget_s=0.5):
    fn(state, one, two)  # warm up / JIT caches
    t0 = time.perf_counter()
    reps = 0
    while time.perf_counter() - t0 < budget_s:
        fn(state, one, two)
        reps += 1
    return (time.perf_counter() - t0) / reps


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--orders", default="1,2,3")
    parser.add_argument("--sizes", default="4,8,16,24,32,48,64,96")
    parser.add_argument("--budget", type=float, default=0.4,
                        help="seconds of timing per cell")
    args = parser.parse_args()
    orders = [int(x) for x in args.orders.split(",")]
    sizes = [int(x) for x in args.sizes.split(",")]

    if not cumulant.HAVE_KERNELS:
        print("compiled kernels unavailable: timing numpy only")

    print(f"{'order':>5} {'N':>4} {'cython [ms]':>12} {'numpy [ms]':>12} "
          f"{'ratio np/cy':>12}")
    crossovers = {}
    for order in orders:
        prev_side = None
        for n in sizes:
            if order == 3 and n > 48:
                continue  # full triple tensors get large past this
            state, one, two = build_problem(n, order)
            t_np = time_call(numpy_rhs.rhs, state, one, two, args.budget)
            if cumulant.HAVE_KERNELS:
                t_cy = time_call(backend._cython_rhs, state, one, two,
                                 args.budget)
                ratio = t_np / t_cy
                side = "cy" if ratio > 1 else "np"
                if prev_side == "cy" and side == "np":
                    crossovers[order] = n
                prev_side = side
                print(f"{order:>5} {n:>4} {1e3*t_cy:>12.3f} {1e3*t_np:>12.3f} "
                      f"{ratio:>12.2f}")
            else:
                print(f"{order:>5} {n:>4} {'-':>12} {1e3*t_np:>12.3f} "
                      f"{'-':>12}")
    if crossovers:
        print("\nmeasured numpy-overtakes-cython sizes:", crossovers)
        print("auto-dispatch cutoffs in use:", backend.AUTO_CUTOFF)


if __name__ == "__main__":
    main()
