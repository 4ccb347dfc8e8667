"""Benchmark the numba kernel build against the pure-numpy fallback.

Both builds of every hot kernel are importable side by side, so one process
can time them on identical synthetic batches and confirm they agree.  Run:

    python bench/benchmark.py [--nodes 20000] [--repeats 7]

The package-level selection is environmental (set ALFMASS_NO_NUMBA=1 to run
the whole library on the numpy build); this script ignores the flag and
always exercises both when numba is importable.
"""

import argparse
import time

import numpy as np

from alfmass import kernels
from alfmass._accel import NUMBA_AVAILABLE


def make_batch(n_nodes, nf, seed=0):
    rng = np.random.default_rng(seed)
    g0 = rng.normal(size=(n_nodes, nf, nf)) * 0.05
    g0 = g0 + np.transpose(g0, (0, 2, 1)) + np.eye(nf)
    dg = rng.normal(size=(n_nodes, nf, nf, nf)) * 0.1
    dg = dg + np.transpose(dg, (0, 1, 3, 2))
    gamma = np.zeros((n_nodes, nf, nf, nf))
    m = nf - 1
    om = rng.normal(size=(n_nodes, m, m)) * 0.1
    om = om - np.transpose(om, (0, 2, 1))
    gamma[:, :m, m, :m] = 0.5 * om
    gamma[:, m, :m, :m] = 0.5 * om
    gamma[:, :m, :m, m] = -0.5 * om
    xhat = rng.normal(size=(n_nodes, m))
    xhat /= np.linalg.norm(xhat, axis=1, keepdims=True)
    return g0, dg, gamma, xhat


def time_call(fn, *args, repeats=7):
    fn(*args)  # warm-up / JIT
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--nodes", type=int, default=20000)
    parser.add_argument("--repeats", type=int, default=7)
    parser.add_argument("--frame-dim", type=int, default=4)
    args = parser.parse_args()

    g0, dg, gamma, xhat = make_batch(args.nodes, args.frame_dim)
    covg = kernels.cov_deriv_batch_numpy(dg, g0, gamma)
    coeffs = np.array([1.0] + [0.0] * (args.frame_dim - 2))
    big = np.random.default_rng(1).normal(size=args.nodes * 32)
    rng_pt = np.random.default_rng(2)
    ric_g = g0[0]
    ric_dg = dg[0]
    ric_ddg = rng_pt.normal(size=(args.frame_dim,) * 4)

    cases = [
        ("pairwise_sum", (big,), kernels.pairwise_sum_numpy,
         getattr(kernels, "pairwise_sum_numba", None)),
        ("cov_deriv_batch", (dg, g0, gamma), kernels.cov_deriv_batch_numpy,
         getattr(kernels, "cov_deriv_batch_numba", None)),
        ("mass_integrands", (covg, g0, gamma, xhat), kernels.mass_integrands_numpy,
         getattr(kernels, "mass_integrands_numba", None)),
        ("qform_radial", (covg, g0, gamma, xhat, coeffs), kernels.qform_radial_numpy,
         getattr(kernels, "qform_radial_numba", None)),
        ("simplified_gb", (np.ascontiguousarray(dg), xhat), kernels.simplified_gb_numpy,
         getattr(kernels, "simplified_gb_numba", None)),
        ("ricci_from_derivs", (ric_g, ric_dg, ric_ddg), kernels.ricci_from_derivs_numpy,
         getattr(kernels, "ricci_from_derivs_numba", None)),
    ]

    print(f"batch: {args.nodes} nodes, frame dim {args.frame_dim}; "
          f"best of {args.repeats}")
    print(f"{'kernel':<20} {'numpy':>12} {'numba':>12} {'speedup':>9}  agree")
    for name, call_args, fn_np, fn_nb in cases:
        t_np = time_call(fn_np, *call_args, repeats=args.repeats)
        if NUMBA_AVAILABLE and fn_nb is not None:
            t_nb = time_call(fn_nb, *call_args, repeats=args.repeats)
            out_np, out_nb = fn_np(*call_args), fn_nb(*call_args)
            if isinstance(out_np, tuple):
                agree = all(
                    np.allclose(a, b, rtol=1e-12, atol=1e-12)
                    for a, b in zip(out_np, out_nb)
                )
            else:
                agree = np.allclose(out_np, out_nb, rtol=1e-12, atol=1e-12)
            print(f"{name:<20} {t_np * 1e3:>10.3f}ms {t_nb * 1e3:>10.3f}ms "
                  f"{t_np / t_nb:>8.1f}x  {agree}")
        else:
            print(f"{name:<20} {t_np * 1e3:>10.3f}ms {'n/a':>12} {'':>9}")


if __name__ == "__main__":
    main()
