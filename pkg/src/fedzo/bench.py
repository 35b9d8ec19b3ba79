"""Benchmark the compiled round-engine kernel against the pure-Python
fallback and check that both produce bit-identical traces.

Run as ``python -m fedzo.bench`` (optionally ``--n``, ``--m``, ``--d``).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from . import _kernels
from ._accel import NUMBA_ENABLED
from .engine import RunConfig, default_hyperparams, run_federated
from .geometry import FeasibleSet
from .objectives import make_problem


def _build_cfg(n: int, m: int, d: int, seed: int) -> RunConfig:
    theta = np.zeros(d)
    theta[0] = 2.0
    problem = make_problem("shifted-norm", d, theta=theta, noise_scale=0.1)
    fset = FeasibleSet.euclidean_ball(np.zeros(d), 1.0)
    h, eta = default_hyperparams(problem.L, fset.diameter, d, n, m)
    return RunConfig(n=n, m=m, problem=problem, feasible=fset, h=h, eta=eta,
                     x1=np.zeros(d), seed=seed)


def _time_kernel(kernel, cfg: RunConfig, zetas, ctxs, repeats: int):
    set_kind, sp1, sp2, radius = cfg.feasible.kernel_args()
    args = (zetas, ctxs, np.asarray(cfg.x1, dtype=np.float64), cfg.h, cfg.eta,
            cfg.problem.family_code, cfg.problem.mat, cfg.problem.vec,
            set_kind, sp1, sp2, radius)
    kernel(*args)  # warmup / compile
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = kernel(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="kernel benchmark")
    parser.add_argument("--n", type=int, default=2048)
    parser.add_argument("--m", type=int, default=8)
    parser.add_argument("--d", type=int, default=10)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args(argv)

    cfg = _build_cfg(args.n, args.m, args.d, seed=0)
    from .engine import _precompute_draws
    zetas, ctxs = _precompute_draws(cfg, parallel=False)

    compiled = _kernels.simulate_rounds
    fallback = compiled.py_func

    t_py, out_py = _time_kernel(fallback, cfg, zetas, ctxs, max(1, args.repeats // 3))
    label = "numba njit" if NUMBA_ENABLED else "uncompiled (numba disabled)"
    t_jit, out_jit = _time_kernel(compiled, cfg, zetas, ctxs, args.repeats)

    xs_equal = np.array_equal(out_py[0], out_jit[0])
    gs_equal = np.array_equal(out_py[1], out_jit[1])
    print(f"round engine, n={args.n} m={args.m} d={args.d}")
    print(f"  pure python : {t_py:.4f} s")
    print(f"  {label:12s}: {t_jit:.4f} s  (speedup {t_py / t_jit:.1f}x)")
    print(f"  bit-identical traces: {xs_equal and gs_equal}")

    t0 = time.perf_counter()
    trace = run_federated(cfg)
    t_full = time.perf_counter() - t0
    print(f"  full run (draws + kernel + metrics): {t_full:.4f} s, "
          f"avg regret {trace.average_regret:.4f}")
    return 0 if (xs_equal and gs_equal) else 1


if __name__ == "__main__":
    raise SystemExit(main())
