"""Gaussian motional states in zero-point units of the base trap.

A state is a mean vector (Q, P) and a 2x2 symmetric covariance V.
Ground state: V = identity. Thermal state of occupation n: V = (2n+1) I.
Physical states satisfy det V >= 1 (Heisenberg); evolution under the
models in this package preserves that, and tests assert it, but the
container itself only requires symmetry and positive definiteness so
that filter intermediates (very broad priors) can use the same type.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_SYM_TOL = 1e-9


def _as_mean(mean) -> np.ndarray:
    arr = np.asarray(mean, dtype=float)
    if arr.shape != (2,):
        raise ValueError(f"mean must have shape (2,), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"mean must be finite, got {arr}")
    return arr


def _as_cov(cov) -> np.ndarray:
    arr = np.asarray(cov, dtype=float)
    if arr.shape != (2, 2):
        raise ValueError(f"cov must have shape (2, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"cov must be finite, got {arr}")
    scale = max(1.0, float(np.max(np.abs(arr))))
    if abs(arr[0, 1] - arr[1, 0]) > _SYM_TOL * scale:
        raise ValueError(f"cov must be symmetric, got {arr}")
    arr = 0.5 * (arr + arr.T)
    # positive definite: both leading minors positive
    if arr[0, 0] <= 0.0 or np.linalg.det(arr) <= 0.0:
        raise ValueError(f"cov must be positive definite, got {arr}")
    return arr


@dataclass(frozen=True)
class GaussianState:
    """Mean (Q, P) and covariance of a Gaussian motional state, zp units."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "mean", _as_mean(self.mean))
        object.__setattr__(self, "cov", _as_cov(self.cov))

    @property
    def q(self) -> float:
        return float(self.mean[0])

    @property
    def p(self) -> float:
        return float(self.mean[1])


def thermal_state(n: float) -> GaussianState:
    """Zero-mean thermal state of occupation n: V = (2n + 1) I."""
    if n < 0.0:
        raise ValueError(f"occupation n must be >= 0, got {n}")
    return GaussianState(np.zeros(2), (2.0 * n + 1.0) * np.eye(2))


def occupation(state: GaussianState) -> float:
    """Thermal phonon occupation (V11 + V22 - 2) / 4.

    Computed from the covariance alone, whatever the mean; the coherent
    energy of a displaced mean is reported separately by callers that
    need it.
    """
    return float(state.cov[0, 0] + state.cov[1, 1] - 2.0) / 4.0


def apply_impulse(state: GaussianState, dp: float) -> GaussianState:
    """Instantaneous momentum kick: P -> P + dp, covariance unchanged."""
    if not np.isfinite(dp):
        raise ValueError(f"dp must be finite, got {dp}")
    mean = state.mean.copy()
    mean[1] += dp
    return GaussianState(mean, state.cov)


def quarter_period_map(r: float) -> np.ndarray:
    """Symplectic map of one quarter period in the softened trap.

    Stepping the trap frequency from Omega to Omega / r and waiting a
    quarter of the soft period rotates phase space by 90 degrees while
    the frozen base-trap normalization stretches the quadratures:

        S(r) = [[0, r], [-1/r, 0]]

    so an initial (Q, P) maps to (r P, -Q / r). Two applications give
    S(r)^2 = -I. r = 1 is the plain quarter-period rotation.
    """
    if r < 1.0:
        raise ValueError(f"squeeze ratio r must be >= 1, got {r}")
    return np.array([[0.0, r], [-1.0 / r, 0.0]])


def apply_linear(state: GaussianState, m: np.ndarray) -> GaussianState:
    """Apply a linear phase-space map: mean -> M mean, V -> M V M^T."""
    m = np.asarray(m, dtype=float)
    if m.shape != (2, 2):
        raise ValueError(f"map must have shape (2, 2), got {m.shape}")
    return GaussianState(m @ state.mean, m @ state.cov @ m.T)
