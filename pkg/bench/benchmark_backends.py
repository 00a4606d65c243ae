"""Compare the numba and numpy kernel backends.

Times the hot kernels on batch sizes typical of the default scenario and
then a short end-to-end Monte Carlo, confirming both backends agree on
the result. Run from the repository root:

    python3 bench/benchmark_backends.py [--runs 5] [--steps 50]
"""

import argparse
import time

import numpy as np

from rcif import kernels
from rcif.config import ScenarioConfig
from rcif.metrics import run_monte_carlo


def best_of(fn, repeats=5, inner=20):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        for _ in range(inner):
            fn()
        times.append((time.perf_counter() - start) / inner)
    return min(times)


def kernel_cases(batch=80, dim=5):
    rng = np.random.default_rng(0)
    a = rng.standard_normal((batch, dim, dim))
    covs = a @ a.swapaxes(1, 2) + dim * np.eye(dim)
    means = rng.standard_normal((batch, dim))
    lowers = np.linalg.cholesky(covs)
    pts = np.ascontiguousarray(
        means[:, None, :] + rng.standard_normal((batch, 2 * dim, dim)))
    flat = pts.reshape(-1, dim)
    return {
        "chol_spd": lambda k: k.chol_spd(covs),
        "inv_spd": lambda k: k.inv_spd(covs),
        "cubature_points": lambda k: k.cubature_points(means, lowers),
        "moments": lambda k: k.moments(pts),
        "ct_propagate": lambda k: k.ct_propagate(flat, 1.0),
        "range_bearing": lambda k: k.range_bearing(flat, 100.0, -50.0),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--runs", type=int, default=5,
                        help="Monte Carlo runs in the end-to-end timing")
    parser.add_argument("--steps", type=int, default=50)
    args = parser.parse_args()

    cases = kernel_cases()
    names = list(cases)
    timings = {}
    for backend in ("numba", "numpy"):
        kernels.set_backend(backend)
        k = kernels.active
        for fn in cases.values():  # warm caches and JIT before timing
            fn(k)
        timings[backend] = {name: best_of(lambda f=fn: f(k))
                            for name, fn in cases.items()}

    width = max(len(n) for n in names)
    print(f"{'kernel':<{width}}  {'numba':>10}  {'numpy':>10}  speedup")
    for name in names:
        nb = timings["numba"][name]
        np_ = timings["numpy"][name]
        print(f"{name:<{width}}  {nb * 1e6:>8.1f}us  {np_ * 1e6:>8.1f}us"
              f"  {np_ / nb:>6.2f}x")

    cfg = ScenarioConfig(active_count=3, passive_count=6, comm_count=16,
                         steps=args.steps, runs=args.runs, seed=1)
    print(f"\nend to end: {cfg.runs} runs x {cfg.steps} steps, "
          f"{cfg.node_count} nodes, all algorithms")
    trmse = {}
    for backend in ("numba", "numpy"):
        kernels.set_backend(backend)
        run_monte_carlo(ScenarioConfig(steps=2, runs=1, seed=1))  # warm
        start = time.perf_counter()
        res = run_monte_carlo(cfg)
        elapsed = time.perf_counter() - start
        trmse[backend] = {a: res.trmse(a) for a in res.algorithms}
        print(f"  {backend}: {elapsed:.2f}s")
    worst = max(abs(trmse["numba"][a] - trmse["numpy"][a])
                / trmse["numpy"][a] for a in trmse["numba"])
    print(f"  largest TRMSE disagreement between backends: {worst:.2e}")


if __name__ == "__main__":
    main()
