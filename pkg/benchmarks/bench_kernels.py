"""Time the compiled kernels against their numpy fallbacks.

Usage::

    python benchmarks/bench_kernels.py            # per-kernel timings
    python benchmarks/bench_kernels.py --e2e      # also one optimizer run per backend

The end-to-end timing runs in subprocesses so ``SIXDMA_DISABLE_NUMBA`` can
take effect before import.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from sixdma import _kernels
from sixdma._accel import HAS_NUMBA
from sixdma.geometry import rotation_matrix, wave_vectors

E2E = """
import time, numpy as np
from sixdma.harness import ExperimentConfig, realization_setup, stream
from sixdma.cssca import CsscaConfig, run
cfg = ExperimentConfig()
sc, paths = realization_setup(cfg, 0, float('nan'))
run(sc, paths, CsscaConfig(s_max=2), stream(0, 0, 2))  # warm-up / compile
t0 = time.perf_counter()
run(sc, paths, CsscaConfig(s_max=100), stream(0, 0, 2))
print(time.perf_counter() - t0)
"""


def _inputs(N, K, L, M, seed=0):
    rng = np.random.default_rng(seed)
    t = rng.standard_normal((N, 3)) * 0.05
    R = rotation_matrix(rng.uniform(-0.5, 0.5, 3))
    dirs = np.ascontiguousarray(wave_vectors(rng.uniform(0, 2 * np.pi, (K, L)), rng.uniform(0, np.pi, (K, L))))
    psi = rng.standard_normal((K, L)) + 1j * rng.standard_normal((K, L))
    H = rng.standard_normal((N, K)) + 1j * rng.standard_normal((N, K))
    A = rng.standard_normal((M, K, K)) + 1j * rng.standard_normal((M, K, K))
    B = A @ np.conj(np.swapaxes(A, -1, -2))
    c = rng.standard_normal((K, M, K)) + 1j * rng.standard_normal((K, M, K))
    return (t, R, dirs, psi, 2 * np.pi / 0.015), (H, 1e-2), (A, B, c, 1e-2)


def _best(fn, args, number):
    fn(*args)  # compile / warm caches
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=5)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--e2e", action="store_true", help="also time a 100-iteration optimizer run per backend")
    ap.add_argument("--number", type=int, default=2000)
    args = ap.parse_args()
    if not HAS_NUMBA:
        sys.exit("numba is disabled or missing; nothing to compare")

    print(f"{'kernel':<24}{'shape':<18}{'numpy us':>10}{'numba us':>10}{'speedup':>9}")
    for N, K, L, M in [(4, 4, 4, 4), (6, 10, 6, 10)]:
        ch, st, sr = _inputs(N, K, L, M)
        for name, args_ in [("ap_channel", ch), ("ap_stats", st), ("sum_rate_from_stats", sr)]:
            t_np = _best(getattr(_kernels, name + "_numpy"), args_, args.number)
            t_nb = _best(getattr(_kernels, name + "_numba"), args_, args.number)
            shape = f"N{N} K{K} L{L} M{M}"
            print(f"{name:<24}{shape:<18}{t_np * 1e6:>10.2f}{t_nb * 1e6:>10.2f}{t_np / t_nb:>8.1f}x")

    if args.e2e:
        for label, flag in [("numba", "0"), ("numpy", "1")]:
            env = dict(os.environ, SIXDMA_DISABLE_NUMBA=flag)
            out = subprocess.run([sys.executable, "-c", E2E], env=env, capture_output=True, text=True, check=True)
            print(f"optimizer run (desk, 100 iterations) with {label}: {float(out.stdout):.2f} s")


if __name__ == "__main__":
    main()
