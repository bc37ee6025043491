"""Compare the compiled and pure-Python numeric backends.

Times each hot spot in isolation at the sizes a 50-action campaign uses,
then a short end-to-end synthetic experiment per agent with each backend
swapped in. Usage: ``python3 benchmarks/bench_backends.py [--repeat N]``.
"""

import argparse
import timeit
from contextlib import contextmanager

import numpy as np

import repalign.agents as agents_mod
import repalign.alignment as alignment_mod
from repalign import _accel_py
from repalign.simulation import EpisodeConfig, run_synthetic_experiment

try:
    from repalign import _accel
except ImportError:  # pragma: no cover
    _accel = None


@contextmanager
def backend(mod):
    saved = (agents_mod.kernel_posterior, agents_mod.svr_smo, alignment_mod.average_ranks)
    agents_mod.kernel_posterior = mod.kernel_posterior
    agents_mod.svr_smo = mod.svr_smo
    alignment_mod.average_ranks = mod.average_ranks
    try:
        yield
    finally:
        (agents_mod.kernel_posterior, agents_mod.svr_smo,
         alignment_mod.average_ranks) = saved


def kernel_cases(rng):
    s = rng.uniform(-3, 3, 50)
    K = 1.0 - np.abs(s[:, None] - s[None, :]) / 6.0
    obs = np.sort(rng.choice(50, 25, replace=False))
    y = rng.normal(size=25)
    targets = rng.choice(50, 10, replace=False)
    diag = np.full(25, 1.0)
    Ko = np.ascontiguousarray(K[np.ix_(obs, obs)])
    pairs = rng.integers(0, 5, 1225).astype(float)
    return {
        "average_ranks(1225 ties)": lambda m: m.average_ranks(pairs),
        "kernel_posterior(25 obs, 10 targets)":
            lambda m: m.kernel_posterior(K, obs, diag, y, targets, True),
        "svr_smo(25 points)": lambda m: m.svr_smo(Ko, y, 1.0, 0.1, 1e-3, 25_000),
    }


def best_of(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--runs", type=int, default=10, help="end-to-end runs per agent")
    args = ap.parse_args()
    if _accel is None:
        print("compiled extension not built; nothing to compare")
        return
    mods = {"cython": _accel, "python": _accel_py}

    print(f"{'kernel':<40}{'cython':>12}{'python':>12}{'speedup':>10}")
    for name, fn in kernel_cases(np.random.default_rng(0)).items():
        t = {k: best_of(lambda: fn(m), args.repeat, 200) for k, m in mods.items()}
        print(f"{name:<40}{t['cython'] * 1e6:>10.1f}us{t['python'] * 1e6:>10.1f}us"
              f"{t['python'] / t['cython']:>9.1f}x")

    print(f"\n{'end to end (' + str(args.runs) + ' runs, k uniform)':<40}"
          f"{'cython':>12}{'python':>12}{'speedup':>10}")
    ep = EpisodeConfig()
    ks = np.random.default_rng(1).integers(0, 51, args.runs)
    for agent in ("gp", "kernel_ridge", "svr"):
        t = {}
        for k, m in mods.items():
            with backend(m):
                t[k] = best_of(lambda: [run_synthetic_experiment(agent, int(c), i, episode=ep)
                                        for i, c in enumerate(ks)], 1, 1)
        print(f"{agent:<40}{t['cython']:>11.2f}s{t['python']:>11.2f}s"
              f"{t['python'] / t['cython']:>9.1f}x")


if __name__ == "__main__":
    main()
