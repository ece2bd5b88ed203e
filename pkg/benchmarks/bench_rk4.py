"""Compiled vs numpy kernels: RK4 stepping and pole sums.

Usage::

    python3 benchmarks/bench_rk4.py [--repeat 3]

Prints wall time per kernel for both backends and the maximum difference of
their outputs. Without the compiled extension only the numpy timings are shown.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from wqed_precursors import kernels
from wqed_precursors.model import PulseSpec, lattice
from wqed_precursors.oracle import _qubit_blocks, _rk4_maps


def _best(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _cases():
    rng = np.random.default_rng(0)
    for n in (5, 20, 50):
        arr = lattice(n, np.pi / 2, 1.0)
        A, b, r = _qubit_blocks(arr, PulseSpec(0.3, 0.0, 40.0))
        h = 0.01 / (1 + n)
        P, q = _rk4_maps(A, b, h)
        steps = 20_000
        drive = np.ones(steps, dtype=complex)
        y0 = np.zeros(n, dtype=complex)
        yield (f"lti_steps N={n} x{steps}",
               lambda P=P, q=q, d=drive, y=y0, r=r: kernels.lti_steps_py(P, q, d, y, r)[0],
               lambda P=P, q=q, d=drive, y=y0, r=r: kernels._compiled(P, q, d, y, r)[0]
               if kernels._compiled else None)
    for m in (20, 300):
        poles = rng.normal(size=m) - 1j * rng.uniform(0.5, 3.0, m)
        w = rng.normal(size=m) + 1j * rng.normal(size=m)
        x = np.linspace(-500, 500, 1 << 16).astype(complex)
        yield (f"pole_sum M={m} x{x.size}",
               lambda x=x, p=poles, w=w: kernels.pole_sum_py(x, p, w),
               lambda x=x, p=poles, w=w: kernels._compiled_pole_sum(x, p, w)
               if kernels._compiled_pole_sum else None)
        yield (f"exp_pole_sum M={m} x{x.size}",
               lambda p=poles, w=w: kernels.exp_pole_sum_py(0.0, 1e-3, 1 << 16, p, w),
               lambda p=poles, w=w: kernels._compiled_exp_sum(0.0, 1e-3, 1 << 16, p, w)
               if kernels._compiled_exp_sum else None)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    print(f"backend selected at import: {kernels.BACKEND}")
    print(f"{'kernel':32s} {'numpy [s]':>10s} {'compiled [s]':>13s} {'speed-up':>9s} "
          f"{'max |diff|':>11s}")
    for name, py, cy in _cases():
        t_py, out_py = _best(py, args.repeat)
        if kernels.BACKEND == "compiled":
            t_cy, out_cy = _best(cy, args.repeat)
            diff = float(np.max(np.abs(out_py - out_cy)))
            print(f"{name:32s} {t_py:10.4f} {t_cy:13.4f} {t_py / t_cy:9.1f} {diff:11.2e}")
        else:
            print(f"{name:32s} {t_py:10.4f} {'-':>13s} {'-':>9s} {'-':>11s}")


if __name__ == "__main__":
    main()
