"""Time the numba kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--repeat 5]

Both variants are called directly, so the GTNB_DISABLE_NUMBA flag does not
matter here. The first numba call (compilation or cache load) is excluded.
"""

import argparse
import timeit

import numpy as np

from gtnb import _kernels
from gtnb.core import DefectiveSet, pack_bits


def gamma_inputs(size, seed=0):
    rng = np.random.default_rng(seed)
    s = rng.uniform(0.01, 50.0, size)
    y = s * rng.lognormal(0.0, 0.5, size)
    return s, y


def comp_inputs(batch, T, n, p, seed=0):
    rng = np.random.default_rng(seed)
    rows = pack_bits(rng.random((batch, T, n)) < p)
    K = DefectiveSet.first_k(n, 10)
    return rows, K.mask, K.complement_mask


def bench(label, fn_numba, fn_numpy, args, repeat, check):
    fn_numba(*args)
    t_nb = min(timeit.repeat(lambda: fn_numba(*args), number=1, repeat=repeat))
    t_np = min(timeit.repeat(lambda: fn_numpy(*args), number=1, repeat=repeat))
    check(fn_numba(*args), fn_numpy(*args))
    print(f"{label:<34} numba {t_nb * 1e3:9.2f} ms   numpy {t_np * 1e3:9.2f} ms   speedup {t_np / t_nb:6.1f}x")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    close = lambda a, b: np.testing.assert_allclose(a, b, rtol=1e-12, atol=0)
    equal = np.testing.assert_array_equal
    for size in (1_000, 100_000):
        bench(f"upper_gamma_q  size={size}", _kernels.upper_gamma_q_numba, _kernels.upper_gamma_q_numpy,
              gamma_inputs(size), args.repeat, close)
    for batch, T, n in ((256, 100, 500), (64, 500, 2500)):
        bench(f"comp_intruders B={batch} T={T} n={n}", _kernels.comp_intruders_numba, _kernels.comp_intruders_numpy,
              comp_inputs(batch, T, n, 0.1), args.repeat, equal)


if __name__ == "__main__":
    main()
