"""Time the compiled kernels against the pure-Python fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from cowgait import kernels


def _cases(rng):
    x = np.cumsum(rng.normal(0, 3, 3000))
    x[rng.integers(1, 2999, 30)] += 80.0
    Xs = rng.normal(size=(400, 10))
    t = (Xs[:, 0] + 0.3 * rng.normal(size=400) > 0).astype(float)
    feats = np.arange(10, dtype=np.int64)
    Xk = rng.normal(size=(200, 10))
    yk = np.where(Xk[:, 0] + 0.5 * rng.normal(size=200) > 0, 1.0, -1.0)
    d = ((Xk[:, None, :] - Xk[None, :, :]) ** 2).sum(axis=2)
    K = np.ascontiguousarray(np.exp(-0.1 * d))
    return {
        "mad_filter (3000 samples)": lambda m: m.mad_filter(x, 3, 3.0, 10.0),
        "best_split (400 x 10)": lambda m: m.best_split(Xs, t, feats, 1),
        "smo_solve (200 x 200 rbf)": lambda m: m.smo_solve(K, yk, 1.0, 1e-3, 100_000),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if kernels.compiled is None:
        print("compiled kernels not built; only the Python fallback is available")
    backends = [("python", kernels.python)]
    if kernels.compiled is not None:
        backends.append(("cython", kernels.compiled))
    print(f"{'kernel':<28}" + "".join(f"{name:>12}" for name, _ in backends) + ("     speedup" if len(backends) == 2 else ""))
    for label, fn in _cases(np.random.default_rng(0)).items():
        times = []
        for _, mod in backends:
            fn(mod)  # warm-up
            times.append(min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat)))
        row = f"{label:<28}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times)
        if len(times) == 2:
            row += f"{times[0] / times[1]:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
