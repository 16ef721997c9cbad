"""Compare the compiled smoother kernel against the pure-Python fallback.

Runs the same scalar-output smoothing sweep through three paths: the
compiled extension (if built), the numpy fallback with the identical
signature, and the general reference smoother. Reports wall time per sweep.

Usage: python benchmarks/bench_mbf.py [--K 2000] [--n 4] [--reps 20]
"""

import argparse
import time

import numpy as np

from nuvssm import COMPILED, StateSpaceModel, GaussianMoment, mbf_smooth
from nuvssm import _kernel_py

try:
    from nuvssm._mbf import mbf_scalar as compiled_kernel
except ImportError:
    compiled_kernel = None


def make_problem(rng, n, K):
    U, _ = np.linalg.qr(rng.standard_normal((n, n)))
    V, _ = np.linalg.qr(rng.standard_normal((n, n)))
    A = U @ np.diag(rng.uniform(0.3, 0.99, size=n)) @ V.T
    B = rng.standard_normal((n, 1))
    c = rng.standard_normal(n)
    y = rng.standard_normal(K)
    r = rng.uniform(0.2, 1.0, size=K)
    d = rng.uniform(0.0, 1.0, size=(K, 1))
    m0 = np.zeros(n)
    V0 = np.eye(n)
    return A, B, c, y, r, d, m0, V0


def bench(fn, args, reps):
    fn(*args)  # warm up
    t0 = time.perf_counter()
    for _ in range(reps):
        fn(*args)
    return (time.perf_counter() - t0) / reps


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--K", type=int, default=2000)
    ap.add_argument("--n", type=int, default=4)
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    opts = ap.parse_args()

    rng = np.random.default_rng(opts.seed)
    args = make_problem(rng, opts.n, opts.K)
    A, B, c, y, r, d, m0, V0 = args

    print(f"K={opts.K} n={opts.n} reps={opts.reps} compiled_available={COMPILED}")

    t_py = bench(_kernel_py.mbf_scalar, args, opts.reps)
    print(f"pure-python kernel : {1e3 * t_py:8.2f} ms/sweep")

    if compiled_kernel is not None:
        t_c = bench(compiled_kernel, args, opts.reps)
        print(f"compiled kernel    : {1e3 * t_c:8.2f} ms/sweep  ({t_py / t_c:.1f}x)")
        ref = _kernel_py.mbf_scalar(*args)
        got = compiled_kernel(*args)
        dev = max(float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
                  for a, b in zip(ref[:4], got[:4]))
        print(f"max deviation compiled vs python: {dev:.3e}")

    model = StateSpaceModel(A, B, c.reshape(1, -1), 0.5, opts.K,
                            input_cov=[[0.5]],
                            initial_state=GaussianMoment(m0, V0))
    t_ref = bench(lambda m, yy: mbf_smooth(m, yy, backend="reference"),
                  (model, y), max(1, opts.reps // 4))
    print(f"reference smoother : {1e3 * t_ref:8.2f} ms/sweep")


if __name__ == "__main__":
    main()
