"""Compare the numba kernels with the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--sizes 1000 100000] [--repeat 5]

Each kernel is warmed up once (JIT compilation is excluded) and timed as the
best of ``--repeat`` runs.  The results of both backends are also compared.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from ringpair import _kernels


def _inputs(n, rng):
    reals = [rng.uniform(-np.pi, np.pi, n), rng.uniform(-np.pi, np.pi, n),
             rng.uniform(0, 0.99, n), rng.uniform(0, 0.99, n)]
    reals += [np.sqrt(1 - reals[2] ** 2), np.sqrt(1 - reals[3] ** 2)]
    reals += [rng.uniform(0.5, 1, n), rng.uniform(0.5, 1, n)]
    r = 1e-3 * np.exp(1j * rng.uniform(0, 2 * np.pi, n))
    return reals + [r, np.conj(r)]


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench(n, repeat, rng):
    args = _inputs(n, rng)
    c = np.full(n, 0.01)
    theta_p = rng.uniform(0, 2 * np.pi, n)
    rows = []
    results = {}
    for backend in ("numba", "numpy"):
        _kernels.set_backend(backend)
        _kernels.transfer(*(a[:2] for a in args))  # warm-up / JIT compile
        t_tr, raw = _best(lambda: _kernels.transfer(*args), repeat)
        g, h = raw[:, 0:4].reshape(n, 2, 2), raw[:, 4:8].reshape(n, 2, 2)
        _kernels.biphoton(g[:2], h[:2], c[:2], c[:2], theta_p[:2])
        t_bi, amps = _best(lambda: _kernels.biphoton(g, h, c, c, theta_p), repeat)
        results[backend] = (raw, amps[0])
        rows.append((backend, t_tr, t_bi))
    diff = max(float(np.max(np.abs(results["numba"][k] - results["numpy"][k]) /
                            np.maximum(np.abs(results["numpy"][k]), 1e-300))) for k in (0, 1))
    return rows, diff


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[1_000, 10_000, 100_000, 1_000_000])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    if _kernels.numba is None:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(args.seed)
    previous = _kernels.backend()
    print(f"{'n':>9s} {'backend':>8s} {'transfer [s]':>13s} {'biphoton [s]':>13s}")
    try:
        for n in args.sizes:
            rows, diff = bench(n, args.repeat, rng)
            for backend, t_tr, t_bi in rows:
                print(f"{n:9d} {backend:>8s} {t_tr:13.6f} {t_bi:13.6f}")
            (_, nb_tr, nb_bi), (_, np_tr, np_bi) = rows
            print(f"{n:9d} {'speedup':>8s} {np_tr / nb_tr:12.2f}x {np_bi / nb_bi:12.2f}x"
                  f"   max rel. diff {diff:.1e}")
    finally:
        _kernels.set_backend(previous)


if __name__ == "__main__":
    main()
