"""Compare the numba kernels with the pure-numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]

Part one times both implementations of each hot kernel in-process and checks
that they agree bitwise. Part two runs one full outlyingness report on the
minute-wise day simulation in subprocesses with ``MP_NUMBA=1`` and
``MP_NUMBA=0``, so the runtime dispatch is exercised as a user would see it.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from missionprofile import _kernels as k

END_TO_END = """
import time
from missionprofile._accel import USE_NUMBA
from missionprofile.depth import DirectionSet, EvaluationGrid, outlyingness_report
from missionprofile.pipeline import DEFAULT_LAMBDA_GRID, make_bases, smooth_sample
from missionprofile.simgen import DayConfig, gen_temperature_day
from missionprofile.smoothing import SmoothingConfig
sim = gen_temperature_day(DayConfig(seed=0))
sample = smooth_sample(sim.series, make_bases(sim.domain_end, 100, p=2),
                       SmoothingConfig(lambda_grid=DEFAULT_LAMBDA_GRID), sim.device_ids, sim.coordinates)
grid = EvaluationGrid.uniform(0, sim.domain_end, 512)
dirs = DirectionSet.generate(2, sample.n, 250, 0)
outlyingness_report(sample, EvaluationGrid.uniform(0, sim.domain_end, 4), dirs, 0.95)  # warm-up / JIT
start = time.perf_counter()
outlyingness_report(sample, grid, dirs, 0.95)
print(USE_NUMBA, time.perf_counter() - start)
"""


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_rows(repeat):
    rng = np.random.default_rng(0)
    rows = []
    for n in (100, 400):
        x = np.sort(rng.gamma(2.0, size=n))
        k.medcouple_sorted_numba(x)
        same = k.medcouple_sorted_numba(x) == k.medcouple_sorted_numpy(x)
        rows.append((f"medcouple n={n}", best(lambda: k.medcouple_sorted_numba(x), repeat),
                     best(lambda: k.medcouple_sorted_numpy(x), repeat), same))
    for n, dirs in ((100, 250), (200, 500)):
        cloud = rng.standard_t(5, size=(dirs, n))
        points = cloud.copy()
        a = k.ao_max_numba(cloud, points, 0.0)
        b = k.ao_max_numpy(cloud, points, 0.0)
        same = np.array_equal(a[0], b[0]) and a[1] == b[1]
        rows.append((f"AO max n={n} dirs={dirs}", best(lambda: k.ao_max_numba(cloud, points, 0.0), repeat),
                     best(lambda: k.ao_max_numpy(cloud, points, 0.0), repeat), same))
    return rows


def end_to_end():
    out = {}
    for flag in ("1", "0"):
        env = dict(os.environ, MP_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", END_TO_END], env=env, capture_output=True,
                             text=True, check=True)
        out[flag] = float(res.stdout.split()[-1])
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-end-to-end", action="store_true")
    args = ap.parse_args(argv)

    print(f"{'kernel':<28}{'numba [ms]':>12}{'numpy [ms]':>12}{'speed-up':>10}  bitwise equal")
    for name, tn, tp, same in kernel_rows(args.repeat):
        print(f"{name:<28}{tn * 1e3:>12.3f}{tp * 1e3:>12.3f}{tp / tn:>10.1f}  {same}")
    if not args.skip_end_to_end:
        t = end_to_end()
        print("\nfull report, day simulation (n=100, G=512, 250 directions):")
        print(f"  MP_NUMBA=1  {t['1']:.2f} s")
        print(f"  MP_NUMBA=0  {t['0']:.2f} s  ({t['0'] / t['1']:.1f}x slower)")


if __name__ == "__main__":
    main()
