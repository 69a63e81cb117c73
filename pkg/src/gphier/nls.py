"""Split-step spectral solver for i phi_t = -Lap phi + mu |phi|^(2s) phi.

``s = 1`` is the cubic and ``s = 2`` the quintic equation.  Strang splitting:
half nonlinear phase, exact linear Fourier step, half nonlinear phase.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BlowUpError, ConfigError, ShapeMismatchError
from .grid import GridSpec
from .kernel import ModelSpec, check_budget, tensor_from_wavefunction
from .lowrank import SeparableKernel
from .trajectory import TimeGrid, TrajectorySet

BLOWUP_AMPLITUDE = 1e6


@dataclass(eq=False)
class WaveTrajectory:
    grid: GridSpec
    tg: TimeGrid
    states: np.ndarray
    model: ModelSpec

    def mass(self) -> np.ndarray:
        axes = tuple(range(1, self.states.ndim))
        return self.grid.h**self.grid.n * np.sum(np.abs(self.states) ** 2, axis=axes)

    def at(self, t: float) -> np.ndarray:
        i = t / self.tg.dt
        idx = int(round(i))
        if abs(i - idx) > 1e-9 or not 0 <= idx <= self.tg.M:
            raise ConfigError(f"t={t} is not a node of the wave trajectory")
        return self.states[idx]

    def at_nodes(self, tg: TimeGrid) -> np.ndarray:
        """States at the nodes of a coarser grid whose step divides into ours."""
        ratio = self.tg.M / tg.M
        if abs(self.tg.T - tg.T) > 1e-12 * max(1.0, tg.T) or ratio != int(ratio):
            raise ConfigError(
                f"time grid (T={tg.T}, M={tg.M}) is not a subsampling of (T={self.tg.T}, M={self.tg.M})"
            )
        return self.states[:: int(ratio)]


def _dealias_mask(grid: GridSpec) -> np.ndarray:
    cutoff = grid.N / 3.0
    axes = np.meshgrid(*([grid.frequencies] * grid.n), indexing="ij")
    mask = np.ones(grid.shape, dtype=bool)
    for a in axes:
        mask &= np.abs(a) <= cutoff
    return mask


def split_step(
    phi0,
    model: ModelSpec,
    T: float,
    M: int,
    grid: GridSpec,
    dealias: bool = False,
) -> WaveTrajectory:
    if int(M) != M or M < 1:
        raise ConfigError(f"step count must be >= 1, got {M}")
    if T < 0:
        raise ConfigError(f"horizon must be nonnegative, got {T}")
    phi = np.array(phi0, dtype=complex)
    if phi.shape != grid.shape:
        raise ShapeMismatchError(f"initial state shape {phi.shape} != grid shape {grid.shape}")
    sigma = model.step
    dt = T / M
    lin = np.exp(-1j * dt * grid.p_squared)
    mask = _dealias_mask(grid) if dealias else None
    states = np.empty((M + 1,) + grid.shape, dtype=complex)
    states[0] = phi
    half = -1j * model.mu * 0.5 * dt
    for i in range(1, M + 1):
        phi = phi * np.exp(half * np.abs(phi) ** (2 * sigma))
        c = grid.to_coefficients(phi) * lin
        if mask is not None:
            c = c * mask
        phi = grid.from_coefficients(c)
        phi = phi * np.exp(half * np.abs(phi) ** (2 * sigma))
        amp = np.max(np.abs(phi))
        if not np.isfinite(amp) or amp > BLOWUP_AMPLITUDE:
            raise BlowUpError(f"max|phi| = {amp:.3e} at step {i} (t = {i * dt:.6g})")
        states[i] = phi
    return WaveTrajectory(grid, TimeGrid(T, M), states, model)


def factorized_hierarchy(
    traj: WaveTrajectory,
    K: int,
    representation: str = "dense",
    tg: TimeGrid | None = None,
    cap: int | None = None,
) -> TrajectorySet:
    """Tensor-product hierarchy prod_j phi_t(x_j) conj(phi_t(x'_j)) at each node."""
    tg = traj.tg if tg is None else tg
    states = traj.at_nodes(tg)
    grid = traj.grid
    levels = {}
    for k in range(1, K + 1):
        if representation == "dense":
            check_budget(grid, k, cap)
            levels[k] = np.stack([tensor_from_wavefunction(p, k, grid, cap).values for p in states])
        elif representation == "separable":
            levels[k] = [SeparableKernel.from_wavefunction(p, k, grid) for p in states]
        else:
            raise ConfigError(f"representation must be dense or separable, got {representation!r}")
    return TrajectorySet(grid, tg, traj.model, levels, closure="factorized")
