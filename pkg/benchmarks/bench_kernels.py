"""Compare the numba and numpy backends of the two hot kernels.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints one line per kernel with the best-of-N wall time of each backend and
the max abs difference between their outputs.  The first numba call is
excluded (it compiles or loads the cache).
"""

import argparse
import time

import numpy as np

from affinekahler import _kernels
from affinekahler.scalarfield.jets import get_space
from affinekahler.surface import AffineSurface
from affinekahler.parallel import _segment_stages


def best(fn, repeat):
    out = None
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def bench_jet_mul(repeat, rng):
    sp = get_space(4, 4)
    a = rng.normal(size=(4096, sp.ncoef))
    b = rng.normal(size=(4096, sp.ncoef))
    tab = sp.mul_table
    _kernels.jet_mul_numba(a, b, tab)
    t_nb, r_nb = best(lambda: _kernels.jet_mul_numba(a, b, tab), repeat)
    t_np, r_np = best(lambda: _kernels.jet_mul_numpy(a, b, tab), repeat)
    return "jet_mul (4 vars, order 4, 4096 jets)", t_nb, t_np, np.abs(r_nb - r_np).max()


def bench_rk4(repeat, rng):
    S = AffineSurface.type_b(1, 1, 1, 1, 1, 2.0)
    stages, h = _segment_stages(S, (0.8, -0.5), (1.7, 0.6), 20000)
    t0 = rng.normal(size=(4, 2, 2))
    _kernels.rk4_transport_numba(stages, h, t0)
    t_nb, r_nb = best(lambda: _kernels.rk4_transport_numba(stages, h, t0), repeat)
    t_np, r_np = best(lambda: _kernels.rk4_transport_numpy(stages, h, t0), repeat)
    return "rk4_transport (20000 steps, 4 matrices)", t_nb, t_np, np.abs(r_nb - r_np).max()


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    if not _kernels.HAVE_NUMBA:
        print("numba not importable; only the numpy backend exists")
        return
    print(f"{'kernel':42s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s} {'max diff':>10s}")
    for run in (bench_jet_mul, bench_rk4):
        name, t_nb, t_np, diff = run(args.repeat, rng)
        print(f"{name:42s} {1e3 * t_nb:11.3f} {1e3 * t_np:11.3f} {t_np / t_nb:8.2f} {diff:10.2e}")


if __name__ == "__main__":
    main()
