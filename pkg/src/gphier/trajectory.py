"""Uniform time grids and sampled hierarchy trajectories."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeMismatchError
from .grid import GridSpec
from .kernel import DenseKernel, ModelSpec, h_alpha_norm, kernel_shape, norm_from_coefficients
from .lowrank import SeparableKernel, gram_norm


@dataclass(frozen=True)
class TimeGrid:
    T: float
    M: int

    def __post_init__(self):
        if not (self.T >= 0 and np.isfinite(self.T)):
            raise ConfigError(f"time.T must be nonnegative and finite, got {self.T!r}")
        if int(self.M) != self.M or self.M < 1:
            raise ConfigError(f"time.M must be a positive integer, got {self.M!r}")

    @property
    def dt(self) -> float:
        return self.T / self.M

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.M + 1) * self.dt

    def __len__(self):
        return self.M + 1


@dataclass(eq=False)
class TrajectorySet:
    """Hierarchy levels 1..K sampled at every node of a TimeGrid.

    ``levels[k]`` is either a complex array of shape ``(M+1, *kernel_shape)``
    (dense) or a list of ``M+1`` SeparableKernel values.
    """

    grid: GridSpec
    tg: TimeGrid
    model: ModelSpec
    levels: dict
    closure: str = "zero"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        nt = len(self.tg)
        for k, stack in self.levels.items():
            if isinstance(stack, np.ndarray):
                want = (nt,) + kernel_shape(self.grid, k)
                if stack.shape != want:
                    raise ShapeMismatchError(f"level {k} has shape {stack.shape}, expected {want}")
            elif len(stack) != nt:
                raise ShapeMismatchError(f"level {k} has {len(stack)} samples, expected {nt}")
        if sorted(self.levels) != list(range(1, len(self.levels) + 1)):
            raise ShapeMismatchError(f"levels must be 1..K, got {sorted(self.levels)}")

    @property
    def K(self) -> int:
        return len(self.levels)

    @property
    def is_dense(self) -> bool:
        return all(isinstance(v, np.ndarray) for v in self.levels.values())

    def kernel(self, k: int, i: int):
        stack = self.levels[k]
        if isinstance(stack, np.ndarray):
            return DenseKernel._wrap(k, self.grid, stack[i])
        return stack[i]

    def norm_table(self, alpha: float | None = None) -> np.ndarray:
        """Array ``(K, M+1)`` of H^alpha_k norms."""
        alpha = self.model.alpha if alpha is None else alpha
        out = np.zeros((self.K, len(self.tg)))
        for k in range(1, self.K + 1):
            stack = self.levels[k]
            if isinstance(stack, np.ndarray):
                axes = tuple(range(1, stack.ndim))
                coeffs = np.fft.fftn(stack, axes=axes) / np.prod(stack.shape[1:])
                for i in range(len(self.tg)):
                    out[k - 1, i] = norm_from_coefficients(coeffs[i], self.grid, k, alpha)
            else:
                for i, s in enumerate(stack):
                    out[k - 1, i] = gram_norm(s, alpha)
        return out

    def __sub__(self, other: "TrajectorySet") -> "TrajectorySet":
        if other.K != self.K or other.tg != self.tg or other.grid != self.grid:
            raise ShapeMismatchError("trajectories differ in K, time grid or spatial grid")
        if not (self.is_dense and other.is_dense):
            raise ShapeMismatchError("difference is only defined for dense trajectories")
        levels = {k: self.levels[k] - other.levels[k] for k in self.levels}
        return TrajectorySet(self.grid, self.tg, self.model, levels, self.closure)


def dense_norm(g, alpha: float) -> float:
    if isinstance(g, SeparableKernel):
        return gram_norm(g, alpha)
    return h_alpha_norm(g, alpha)
