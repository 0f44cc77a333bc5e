"""Batched trajectory kernels: backend agreement and record statistics."""

import math

import numpy as np
import pytest

from levamp import _kernels
from levamp._kernels import (
    backend,
    chol2x2,
    filter_backward_numpy,
    roll_numpy,
    roll_record_numpy,
)

HAVE_NUMBA = backend() == "numba"
RNG = np.random.default_rng(7321)

M, N = 192, 310
ANGLE = 2.0 * math.pi / 97.0
F_STEP = np.array(
    [[math.cos(ANGLE), math.sin(ANGLE)], [-math.sin(ANGLE), math.cos(ANGLE)]]
)
L_STEP = chol2x2(np.array([[4e-4, 1e-4], [1e-4, 9e-4]]))
X0 = np.ascontiguousarray(RNG.standard_normal((M, 2)))
W = np.ascontiguousarray(RNG.standard_normal((M, N, 2)))
V = np.ascontiguousarray(RNG.standard_normal((M, N)))
GAINS = np.ascontiguousarray(0.05 * RNG.standard_normal((N, 2)))
SQRT_K = 23.7
NOISE_SCALE = 104.5


def test_chol2x2_factors_random_spd_matrices():
    for _ in range(40):
        a = RNG.standard_normal((2, 2))
        q = a @ a.T + 0.1 * np.eye(2)
        c = chol2x2(q)
        assert c[0, 1] == 0.0
        assert np.allclose(c @ c.T, q, atol=1e-12)
        assert np.allclose(c, np.linalg.cholesky(q), atol=1e-12)


def test_chol2x2_handles_semidefinite_corners():
    assert np.array_equal(chol2x2(np.zeros((2, 2))), np.zeros((2, 2)))
    c = chol2x2(np.diag([0.0, 4.0]))
    assert np.allclose(c, [[0.0, 0.0], [0.0, 2.0]])
    c = chol2x2(np.diag([9.0, 0.0]))
    assert np.allclose(c, [[3.0, 0.0], [0.0, 0.0]])


def test_roll_matches_per_trial_recursion():
    out = roll_numpy(X0, F_STEP, L_STEP, W)
    for i in (0, M // 2, M - 1):
        x = X0[i].copy()
        for k in range(N):
            x = F_STEP @ x + L_STEP @ W[i, k]
        assert np.allclose(out[i], x, atol=1e-12)


def test_roll_record_reads_state_before_each_step():
    out, y = roll_record_numpy(X0, F_STEP, L_STEP, W, V, SQRT_K, NOISE_SCALE)
    i = 3
    x = X0[i].copy()
    for k in range(N):
        assert y[i, k] == pytest.approx(
            SQRT_K * x[0] + NOISE_SCALE * V[i, k], abs=1e-12
        )
        x = F_STEP @ x + L_STEP @ W[i, k]
    assert np.allclose(out[i], x, atol=1e-12)


def test_filter_backward_matches_per_trial_recursion():
    fb = np.linalg.inv(F_STEP)
    est = filter_backward_numpy(V, fb, GAINS, SQRT_K)
    for i in (0, M - 1):
        x = np.zeros(2)
        for j in range(N):
            innov = V[i, N - 1 - j] - SQRT_K * x[0]
            x = x + GAINS[j] * innov
            if j < N - 1:
                x = fb @ x
        assert np.allclose(est[i], x, atol=1e-12)


@pytest.mark.skipif(not HAVE_NUMBA, reason="compiled backend not active")
def test_compiled_roll_agrees_bit_for_bit():
    a = _kernels.roll(X0.copy(), F_STEP, L_STEP, W)
    b = roll_numpy(X0.copy(), F_STEP, L_STEP, W)
    assert np.array_equal(a, b)


@pytest.mark.skipif(not HAVE_NUMBA, reason="compiled backend not active")
def test_compiled_roll_record_agrees_bit_for_bit():
    xa, ya = _kernels.roll_record(X0.copy(), F_STEP, L_STEP, W, V, SQRT_K, NOISE_SCALE)
    xb, yb = roll_record_numpy(X0.copy(), F_STEP, L_STEP, W, V, SQRT_K, NOISE_SCALE)
    assert np.array_equal(xa, xb)
    assert np.array_equal(ya, yb)


@pytest.mark.skipif(not HAVE_NUMBA, reason="compiled backend not active")
def test_compiled_filter_agrees_bit_for_bit():
    fb = np.linalg.inv(F_STEP)
    a = _kernels.filter_backward(V, fb, GAINS, SQRT_K)
    b = filter_backward_numpy(V, fb, GAINS, SQRT_K)
    assert np.array_equal(a, b)


def test_chunked_batches_reproduce_the_full_batch():
    """Trials are independent, so splitting the batch cannot change bits."""
    whole = roll_numpy(X0, F_STEP, L_STEP, W)
    split = np.vstack(
        [roll_numpy(X0[:70], F_STEP, L_STEP, W[:70]),
         roll_numpy(X0[70:], F_STEP, L_STEP, W[70:])]
    )
    assert np.array_equal(whole, split)


def test_all_noise_off_collapses_the_ensemble():
    """With every noise source zeroed and one shared initial state, all
    trials trace the same trajectory, produce the same record, and are
    filtered to the same estimate."""
    x0 = np.tile([0.9, -0.4], (M, 1))
    wz = np.zeros((M, N, 2))
    vz = np.zeros((M, N))
    xs, ys = roll_record_numpy(x0, F_STEP, L_STEP, wz, vz, SQRT_K, NOISE_SCALE)
    assert np.all(xs == xs[0])
    assert np.all(ys == ys[0])
    est = filter_backward_numpy(ys, np.linalg.inv(F_STEP), GAINS, SQRT_K)
    assert np.all(est == est[0])


def test_record_gain_regression_recovers_sqrt_meas_rate():
    """Regressing one-step records against the true position recovers the
    sqrt(meas_rate) gain to better than 3 percent at 1e5 trials."""
    meas_rate = 4.0 * 0.14 * 2.0 * math.pi * 3.4e3
    dt = (1.0 / 52e3) / 200.0
    n_trials = 100000
    rng = np.random.default_rng(2026)
    x0 = np.zeros((n_trials, 2))
    x0[:, 0] = 10.0 * rng.standard_normal(n_trials)
    q_true = x0[:, 0].copy()
    v = rng.standard_normal((n_trials, 1))
    _, y = roll_record_numpy(
        x0, np.eye(2), np.zeros((2, 2)), np.zeros((n_trials, 1, 2)),
        v, math.sqrt(meas_rate), 1.0 / math.sqrt(dt),
    )
    slope = float(np.sum(y[:, 0] * q_true) / np.sum(q_true * q_true))
    assert slope == pytest.approx(math.sqrt(meas_rate), rel=0.03)
