"""Time the numba kernels against the numpy fallback on the same inputs.

    python benchmarks/bench_kernels.py [--repeat 3]

Each row also confirms that both backends return identical results.
"""

import argparse
import importlib
import time

import numpy as np

from urk.kernels import inverse_table, key_rows, multiples_table, numpy_impl

try:
    # imported directly so the comparison runs even with URK_DISABLE_NUMBA set
    numba_impl = importlib.import_module("urk.kernels.numba_impl")
except ImportError:
    numba_impl = None


def best_of(fn, repeat):
    out = None
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def cases():
    q = 3
    for m, n in [(49, 256), (654, 4096), (817, 16384)]:
        yield f"fill_matrix {m}x{n}", lambda impl, m=m, n=n: impl.fill_matrix(7, q, m, n)

    a = numpy_impl.fill_matrix(3, q, 60, 60)
    inv = inverse_table(q)
    yield "rref 60x60", lambda impl: impl.rref(a, q, inv)

    for n, m, w in [(64, 39, 4), (256, 49, 3), (4096, 42, 2)]:
        cols = np.ascontiguousarray(numpy_impl.fill_matrix(11, q, m, n).T)
        t = key_rows(n, m, q)
        table = multiples_table(cols, q, t)
        y = np.random.default_rng(n).integers(0, q, m)
        yield f"sparse_search n={n} w={w} (no solution)", (
            lambda impl, cols=cols, y=y, w=w, t=t, table=table: impl.sparse_search(cols, q, y, w, *table, t)
        )


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if numba_impl is None:
        print("numba is not installed; nothing to compare")
        return
    print(f"{'kernel':44s} {'numpy s':>10s} {'numba s':>10s} {'speedup':>8s}  match")
    for name, fn in cases():
        fn(numba_impl)  # compile outside the timed region
        t_np, r_np = best_of(lambda: fn(numpy_impl), args.repeat)
        t_nb, r_nb = best_of(lambda: fn(numba_impl), args.repeat)
        print(f"{name:44s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.1f}  {same(r_np, r_nb)}")


if __name__ == "__main__":
    main()
