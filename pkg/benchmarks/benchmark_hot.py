"""Compare the compiled hot-loop extension against the pure-numpy
fallback on the two inner loops that dominate fit time:

  * smo_solve      — most-violating-pair solver for the one-class dual
  * css_residuals  — conditional-sum-of-squares ARMA residual recursion

Run:  python3 benchmarks/benchmark_hot.py
"""

import time

import numpy as np

from ethsentinel import _hot, _hot_py
from ethsentinel.kernels import KernelSpec, gram


def time_call(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_smo(backend, n=600, nu=0.1, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 5))
    G = np.ascontiguousarray(gram(KernelSpec(), X))
    C = 1.0 / (nu * n)

    def run():
        a = np.zeros(n)
        full = int(1.0 / C)
        a[:full] = C
        if full < n:
            a[full] = 1.0 - full * C
        backend(G, a, C, 1e-6, 200_000, False)

    return time_call(run)


def bench_css(backend, n=20_000, seed=1):
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(n)
    phi = np.array([0.5, -0.2])
    theta = np.array([0.3])
    sphi = np.array([0.1])
    stheta = np.array([-0.1])

    def run():
        backend(w, 0.05, phi, sphi, theta, stheta, 12, 30)

    return time_call(run)


def main():
    if not _hot.COMPILED:
        print("compiled extension not available; benchmarking the fallback only")
    rows = []
    for name, bench in (("smo_solve", bench_smo), ("css_residuals", bench_css)):
        fallback = bench(getattr(_hot_py, name))
        if _hot.COMPILED:
            compiled = bench(getattr(_hot, name))
            rows.append((name, compiled, fallback, fallback / compiled))
        else:
            rows.append((name, None, fallback, None))
    print(f"{'kernel':<16}{'compiled':>12}{'fallback':>12}{'speedup':>10}")
    for name, compiled, fallback, speedup in rows:
        comp = f"{compiled * 1e3:9.2f} ms" if compiled is not None else "        n/a"
        spd = f"{speedup:8.1f}x" if speedup is not None else "       n/a"
        print(f"{name:<16}{comp:>12}{fallback * 1e3:9.2f} ms {spd}")


if __name__ == "__main__":
    main()
