"""Compare the compiled and pure Python kernels on realistic input sizes.

    python benchmarks/bench_kernels.py [--repeat 3]

Sizes: 17125 patients in 171 groups and 14546
event columns.
"""
import argparse
import time

import numpy as np

from adrsig import _pykernels

try:
    from adrsig import _ckernels
except ImportError:
    _ckernels = None

N_PATIENTS = 17125
N_COLUMNS = 14546
GROUP_SIZE = 100


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    t = np.abs(rng.standard_t(5, size=N_COLUMNS)) * 2
    df = np.full(N_COLUMNS, N_PATIENTS // GROUP_SIZE - 1.0)
    nnz = 600_000
    rows = rng.integers(0, N_PATIENTS, size=nnz)
    cols = rng.integers(0, N_COLUMNS, size=nnz)
    n_groups = N_PATIENTS // GROUP_SIZE
    group_of = np.minimum(np.arange(N_PATIENTS) // GROUP_SIZE, n_groups - 1)

    backends = [("python", _pykernels)]
    if _ckernels is not None:
        backends.append(("cython", _ckernels))
    else:
        print("compiled kernels not built; showing the fallback only")

    print(f"{'kernel':<28}{'backend':<10}{'seconds':>10}{'speedup':>10}")
    for label, call in (
        (f"t_sf_many x{N_COLUMNS}", lambda k: k.t_sf_many(t, df)),
        (f"group_counts nnz={nnz}", lambda k: k.group_counts(rows, cols, group_of, n_groups, N_COLUMNS)),
    ):
        base = None
        for name, k in backends:
            secs = best_of(lambda: call(k), args.repeat)
            base = base or secs
            print(f"{label:<28}{name:<10}{secs:>10.4f}{base / secs:>9.1f}x")

    if _ckernels is not None:
        np.testing.assert_allclose(_ckernels.t_sf_many(t, df), _pykernels.t_sf_many(t, df), atol=1e-12, rtol=0)


if __name__ == "__main__":
    main()
