"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeats 5]

Times the three hot kernels on growing inputs and prints the speedup. Both
backends are imported directly so one process can measure both.
"""

import argparse
import time

import numpy as np

from doeopt.kernels import _fallback

try:
    from doeopt.kernels import _native
except ImportError:
    _native = None


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(repeats: int):
    rng = np.random.default_rng(0)
    rows = []
    cases = []
    for n in (64, 256, 1024):
        pts2 = rng.random((n, 2))
        pts3 = rng.random((n, 3))
        cases.append((f"nondominated_mask n={n} m=2", lambda p=pts2: _fallback.nondominated_mask(p),
                      (lambda p=pts2: _native.nondominated_mask(p)) if _native else None))
        cases.append((f"nondominated_mask n={n} m=3", lambda p=pts3: _fallback.nondominated_mask(p),
                      (lambda p=pts3: _native.nondominated_mask(p)) if _native else None))
        g2 = rng.random((n, 2)) + 0.01
        g3 = rng.random((n, 3)) + 0.01
        cases.append((f"hv2d n={n}", lambda g=g2: _fallback.hv2d(g),
                      (lambda g=g2: _native.hv2d(g)) if _native else None))
        cases.append((f"hv3d n={n}", lambda g=g3: _fallback.hv3d(g),
                      (lambda g=g3: _native.hv3d(g)) if _native else None))

    width = max(len(name) for name, _, _ in cases)
    header = f"{'kernel':<{width}}  {'python':>10}  {'native':>10}  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, py_fn, nat_fn in cases:
        t_py = best_of(py_fn, repeats)
        if nat_fn is None:
            print(f"{name:<{width}}  {t_py*1e3:>8.3f}ms  {'--':>10}  {'--':>8}")
            continue
        t_nat = best_of(nat_fn, repeats)
        print(f"{name:<{width}}  {t_py*1e3:>8.3f}ms  {t_nat*1e3:>8.3f}ms  {t_py/t_nat:>7.1f}x")
        rows.append(t_py / t_nat)
    if _native is None:
        print("\ncompiled kernels not built; install with `pip install -e .` to compare")
    elif rows:
        print(f"\nmedian speedup: {np.median(rows):.1f}x over {len(rows)} cases")


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    bench(args.repeats)
