"""Time the compiled kernels against the pure-numpy fallback.

The two paths execute the same arithmetic in the same order, so besides
speed this script asserts that their outputs agree to within a few ulp.
Run from the repository root:

    python3 benchmarks/bench_kernels.py [--trials N] [--steps K]

The numba path needs the numba package; if it is unavailable or
disabled via LEVAMP_DISABLE_NUMBA the script reports that and times
the fallback alone.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from levamp import _kernels
from levamp.dynamics import transition
from levamp.estimation import readout_model, retrodiction_schedule
from levamp.params import OscillatorParams


def _example_problem(n_trials: int, n_steps: int):
    params = OscillatorParams()
    model = readout_model(params)
    dt = params.period_s / 200.0
    f, qd = transition(model, dt)
    chol = np.linalg.cholesky(qd)
    sqrt_k = np.sqrt(model.meas_rate)
    noise_scale = 1.0 / np.sqrt(dt)
    rng = np.random.default_rng(1234)
    x = rng.normal(size=(n_trials, 2))
    w = rng.normal(size=(n_trials, n_steps, 2))
    v = rng.normal(size=(n_trials, n_steps))
    finv, gains, sk, _ = retrodiction_schedule(model, dt, n_steps)
    return x, f, chol, w, v, sqrt_k, noise_scale, finv, gains, sk


def _time(fn, repeats: int = 5) -> float:
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=2048)
    ap.add_argument("--steps", type=int, default=1000)
    args = ap.parse_args()

    x, f, chol, w, v, sqrt_k, noise_scale, finv, gains, sk = _example_problem(
        args.trials, args.steps
    )

    variants = [("numpy", _kernels.roll_record_numpy, _kernels.filter_backward_numpy)]
    if _kernels.backend() == "numba":
        variants.append(("numba", _kernels.roll_record, _kernels.filter_backward))
    else:
        print("numba unavailable or disabled; timing the numpy fallback only")

    results = {}
    for name, roll_record, filter_backward in variants:
        xr, y = roll_record(x.copy(), f, chol, w, v, sqrt_k, noise_scale)
        m = filter_backward(y, finv, gains, sk)
        if name == "numba":  # warm the JIT before timing
            roll_record(x.copy(), f, chol, w, v, sqrt_k, noise_scale)
        t_roll = _time(lambda: roll_record(x.copy(), f, chol, w, v, sqrt_k, noise_scale))
        t_filt = _time(lambda: filter_backward(y, finv, gains, sk))
        results[name] = (t_roll, t_filt, xr, y, m)
        print(f"{name:>6}: roll+record {t_roll * 1e3:8.2f} ms   "
              f"backward filter {t_filt * 1e3:8.2f} ms   "
              f"({args.trials} trials x {args.steps} steps)")

    if len(results) == 2:
        for idx, label in ((2, "final state"), (3, "record"), (4, "estimate")):
            a = results["numpy"][idx]
            b = results["numba"][idx]
            worst = float(np.max(np.abs(a - b)))
            scale = max(1.0, float(np.max(np.abs(a))))
            assert worst <= 1e-12 * scale, f"{label} mismatch: {worst}"
            print(f"agreement on {label}: max abs diff {worst:.2e}")
        speedup_roll = results["numpy"][0] / results["numba"][0]
        speedup_filt = results["numpy"][1] / results["numba"][1]
        print(f"speedup: roll+record {speedup_roll:.1f}x, backward filter {speedup_filt:.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
