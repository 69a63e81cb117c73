"""Quasi-norms on truncated hierarchies.

For a norm sequence ``a_k = ||gamma^(k)||`` the quasi-norm is half the unique
root of ``f(lam) = sum_k a_k lam^-k = 1``.  ``f`` is strictly decreasing, so
the root is bracketed by ``lo = max a_k^(1/k)`` (``f(lo) >= 1``) and
``hi = 2*lo`` (``f(hi) <= sum 2^-k < 1``) and found by bisection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError, ShapeMismatchError
from .grid import GridSpec
from .kernel import DenseKernel, ModelSpec
from .lowrank import SeparableKernel
from .trajectory import TrajectorySet, dense_norm

MAX_BISECTIONS = 200


@dataclass(frozen=True)
class QuasiNormResult:
    value: float
    lambda_star: float
    bracket: tuple[float, float]
    iterations: int
    converged: bool
    K: int = 0

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "lambda_star": self.lambda_star,
            "bracket": list(self.bracket),
            "iterations": self.iterations,
            "converged": self.converged,
            "K": self.K,
        }


def as_norm_sequence(a) -> np.ndarray:
    a = np.asarray(a, dtype=float).reshape(-1)
    if not np.all(np.isfinite(a)):
        raise NumericalError("norm sequence contains non-finite entries")
    if np.any(a < 0):
        raise NumericalError("norm sequence contains negative entries")
    return a


def _log_series(log_a: np.ndarray, ks: np.ndarray, lam: float) -> float:
    return float(np.sum(np.exp(log_a - ks * math.log(lam))))


def quasi_norm(a, rel_tol: float = 1e-12) -> QuasiNormResult:
    a = as_norm_sequence(a)
    if not 0 < rel_tol <= 1e-2:
        raise ConfigError(f"rel_tol must lie in (0, 1e-2], got {rel_tol}")
    K = a.size
    mask = a > 0
    if not mask.any():
        return QuasiNormResult(0.0, 0.0, (0.0, 0.0), 0, True, K)
    ks = np.arange(1, K + 1, dtype=float)[mask]
    log_a = np.log(a[mask])
    lo = float(np.exp(np.max(log_a / ks)))
    hi = 2.0 * lo
    it = 0
    converged = False
    while it < MAX_BISECTIONS:
        if hi - lo <= rel_tol * max(1.0, lo):
            converged = True
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            converged = True  # bracket at floating-point resolution
            break
        if _log_series(log_a, ks, mid) >= 1.0:
            lo = mid
        else:
            hi = mid
        it += 1
    lam = 0.5 * (lo + hi)
    return QuasiNormResult(0.5 * lam, lam, (lo, hi), it, converged, K)


def xi_weighted_norm(a, xi: float) -> float:
    a = as_norm_sequence(a)
    if not 0 < xi < 1:
        raise ConfigError(f"xi must lie in (0, 1), got {xi}")
    return float(np.sum(xi ** np.arange(1, a.size + 1) * a))


def l1t_from_norms(norms: np.ndarray, dt: float) -> np.ndarray:
    """Trapezoidal time integrals of a ``(K, M+1)`` norm table."""
    norms = np.asarray(norms, dtype=float)
    if norms.ndim != 2 or norms.shape[1] < 2:
        raise ShapeMismatchError("time integral needs at least 2 samples per level")
    return dt * (norms[:, 1:-1].sum(axis=1) + 0.5 * (norms[:, 0] + norms[:, -1]))


def l1t_quasi_norm(traj: TrajectorySet, alpha: float | None = None, rel_tol: float = 1e-12) -> QuasiNormResult:
    """Quasi-norm of the sequence of time-integrated level norms."""
    if len(traj.tg) < 2:
        raise ShapeMismatchError("time integral needs at least 2 samples per level")
    b = l1t_from_norms(traj.norm_table(alpha), traj.tg.dt)
    return quasi_norm(b, rel_tol)


def node_quasi_norms(norm_table: np.ndarray, rel_tol: float = 1e-12) -> np.ndarray:
    """Quasi-norm of the level sequence at every node of a ``(K, M+1)`` table."""
    return np.array([quasi_norm(col, rel_tol).value for col in np.asarray(norm_table).T])


def c_quasi_norm(traj: TrajectorySet, alpha: float | None = None, rel_tol: float = 1e-12) -> float:
    """sup over nodes of the hierarchy quasi-norm (the C([0,T]) quasi-norm)."""
    return float(np.max(node_quasi_norms(traj.norm_table(alpha), rel_tol)))


@dataclass(eq=False)
class Hierarchy:
    """Truncated hierarchy gamma^(1..K) sharing one grid."""

    kernels: list
    model: ModelSpec
    grid: GridSpec

    def __post_init__(self):
        if not self.kernels:
            raise ConfigError("a hierarchy needs at least one level")
        for k, g in enumerate(self.kernels, start=1):
            if not isinstance(g, (DenseKernel, SeparableKernel)):
                raise TypeError(f"level {k}: unsupported kernel type {type(g).__name__}")
            if g.k != k:
                raise ShapeMismatchError(f"level {k} holds a kernel with particle number {g.k}")
            if g.grid != self.grid:
                raise ShapeMismatchError(f"level {k} lives on a different grid")

    @property
    def K(self) -> int:
        return len(self.kernels)

    def level(self, k: int):
        return self.kernels[k - 1]

    def norms(self, alpha: float | None = None) -> np.ndarray:
        alpha = self.model.alpha if alpha is None else alpha
        return np.array([dense_norm(g, alpha) for g in self.kernels])

    def quasi_norm(self, alpha: float | None = None, rel_tol: float = 1e-12) -> QuasiNormResult:
        return quasi_norm(self.norms(alpha), rel_tol)

    @classmethod
    def factorized(cls, phi, K: int, model: ModelSpec, grid: GridSpec, representation: str = "dense", cap=None):
        from .kernel import tensor_from_wavefunction

        if representation == "dense":
            kernels = [tensor_from_wavefunction(phi, k, grid, cap) for k in range(1, K + 1)]
        elif representation == "separable":
            kernels = [SeparableKernel.from_wavefunction(phi, k, grid) for k in range(1, K + 1)]
        else:
            raise ConfigError(f"representation must be dense or separable, got {representation!r}")
        return cls(kernels, model, grid)

    def __sub__(self, other: "Hierarchy") -> "Hierarchy":
        if other.K != self.K:
            raise ShapeMismatchError("hierarchies differ in truncation level")
        return Hierarchy([a - b for a, b in zip(self.kernels, other.kernels)], self.model, self.grid)
