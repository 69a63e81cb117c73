"""Dense k-particle kernels gamma(x_1..x_k; x'_1..x'_k) on the torus grid.

A kernel at particle number ``k`` on an ``n``-dimensional grid is stored as a
complex array with ``2*k*n`` axes of length ``N``.  Slot ``s`` occupies axes
``s*n .. s*n+n-1``; slots ``0..k-1`` are the unprimed variables and slots
``k..2k-1`` the primed ones.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import BudgetError, ConfigError, ShapeMismatchError
from .grid import TWO_PI, GridSpec

#: default cap on complex entries of one dense kernel (1 GiB at complex128)
DENSE_ENTRY_CAP = 2**26

_INTERACTIONS = {"cubic": 1, "quintic": 2}


@dataclass(frozen=True)
class ModelSpec:
    mu: int = 1
    interaction: str = "cubic"
    alpha: float = 1.0

    def __post_init__(self):
        if self.mu not in (1, -1):
            raise ConfigError(f"model.mu must be +1 or -1, got {self.mu!r}")
        if self.interaction not in _INTERACTIONS:
            raise ConfigError(f"model.interaction must be cubic or quintic, got {self.interaction!r}")
        if not self.alpha > 0:
            raise ConfigError(f"model.alpha must be positive, got {self.alpha!r}")

    @property
    def step(self) -> int:
        """Number of levels the collision operator skips (1 cubic, 2 quintic)."""
        return _INTERACTIONS[self.interaction]


def kernel_shape(grid: GridSpec, k: int) -> tuple[int, ...]:
    return (grid.N,) * (2 * k * grid.n)


def kernel_entries(grid: GridSpec, k: int) -> int:
    return grid.points ** (2 * k)


def check_budget(grid: GridSpec, k: int, cap: int | None = None):
    cap = DENSE_ENTRY_CAP if cap is None else cap
    size = kernel_entries(grid, k)
    if size > cap:
        raise BudgetError(
            f"dense kernel with k={k} on N={grid.N}, n={grid.n} needs {size} entries "
            f"(cap {cap})"
        )


@dataclass(frozen=True, eq=False)
class DenseKernel:
    k: int
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"particle number must be >= 1, got {self.k}")
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.shape != kernel_shape(self.grid, self.k):
            raise ShapeMismatchError(
                f"values shape {vals.shape} does not match k={self.k} on {self.grid}"
            )
        if vals is self.values or np.shares_memory(vals, self.values):
            vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def _wrap(cls, k: int, grid: GridSpec, values: np.ndarray) -> "DenseKernel":
        # internal: adopt a freshly computed array without copying it
        obj = object.__new__(cls)
        vals = np.asarray(values, dtype=np.complex128)
        if vals.shape != kernel_shape(grid, k):
            raise ShapeMismatchError(f"values shape {vals.shape} does not match k={k} on {grid}")
        vals.setflags(write=False)
        object.__setattr__(obj, "k", k)
        object.__setattr__(obj, "grid", grid)
        object.__setattr__(obj, "values", vals)
        return obj

    @classmethod
    def zeros(cls, grid: GridSpec, k: int, cap: int | None = None) -> "DenseKernel":
        check_budget(grid, k, cap)
        return cls._wrap(k, grid, np.zeros(kernel_shape(grid, k), dtype=complex))

    def _check_compatible(self, other: "DenseKernel"):
        if not isinstance(other, DenseKernel):
            raise TypeError(f"expected DenseKernel, got {type(other).__name__}")
        if other.k != self.k or other.grid != self.grid:
            raise ShapeMismatchError(
                f"kernels differ: k={self.k} vs {other.k}, grid {self.grid} vs {other.grid}"
            )

    def __add__(self, other):
        self._check_compatible(other)
        return DenseKernel._wrap(self.k, self.grid, self.values + other.values)

    def __sub__(self, other):
        self._check_compatible(other)
        return DenseKernel._wrap(self.k, self.grid, self.values - other.values)

    def __mul__(self, scalar):
        return DenseKernel._wrap(self.k, self.grid, self.values * complex(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return DenseKernel._wrap(self.k, self.grid, -self.values)

    def coefficients(self) -> np.ndarray:
        return fourier_coefficients(self.values, self.grid)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return hermitian_defect(self) <= tol

    def is_permutation_symmetric(self, tol: float = 1e-12) -> bool:
        return permutation_defect(self) <= tol


# Fourier-side helpers ------------------------------------------------------

def fourier_coefficients(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    return np.fft.fftn(values) / values.size


def from_coefficients(coeffs: np.ndarray) -> np.ndarray:
    return np.fft.ifftn(coeffs) * coeffs.size


def _outer(arrays) -> np.ndarray:
    out = arrays[0]
    for a in arrays[1:]:
        out = np.multiply.outer(out, a)
    return out


@lru_cache(maxsize=32)
def weight_squared(grid: GridSpec, k: int, alpha: float) -> np.ndarray:
    """Product of squared per-slot Sobolev weights over all 2k slots."""
    w2 = grid.weights(alpha) ** 2
    out = _outer([w2] * (2 * k))
    out.setflags(write=False)
    return out


@lru_cache(maxsize=32)
def dispersion(grid: GridSpec, k: int) -> np.ndarray:
    """sum_j |p_j|^2 - sum_j |p'_j|^2 over the kernel frequency grid."""
    p2 = grid.p_squared
    out = np.zeros(kernel_shape(grid, k))
    ndim = grid.n
    for s in range(2 * k):
        shape = [1] * (2 * k * ndim)
        shape[s * ndim:(s + 1) * ndim] = [grid.N] * ndim
        sign = 1.0 if s < k else -1.0
        out = out + sign * p2.reshape(shape)
    out.setflags(write=False)
    return out


def norm_from_coefficients(coeffs: np.ndarray, grid: GridSpec, k: int, alpha: float) -> float:
    sq = kernels.weighted_sqnorm(coeffs, weight_squared(grid, k, float(alpha)))
    return math.sqrt(TWO_PI ** (2 * k * grid.n) * sq)


# public operations ---------------------------------------------------------

def h_alpha_norm(g: DenseKernel, alpha: float) -> float:
    """||S^(k,alpha) gamma||_{L2} evaluated on the Fourier side."""
    return norm_from_coefficients(g.coefficients(), g.grid, g.k, alpha)


def inner_product(g1: DenseKernel, g2: DenseKernel, alpha: float) -> complex:
    """H^alpha_k inner product, linear in ``g1`` and antilinear in ``g2``."""
    g1._check_compatible(g2)
    w2 = weight_squared(g1.grid, g1.k, float(alpha))
    c1, c2 = g1.coefficients(), g2.coefficients()
    return complex(TWO_PI ** (2 * g1.k * g1.grid.n) * np.sum(w2 * c1 * np.conj(c2)))


def free_phase(grid: GridSpec, k: int, t: float) -> np.ndarray:
    return np.exp(-1j * t * dispersion(grid, k))


def free_propagate(g: DenseKernel, t: float) -> DenseKernel:
    """Apply exp(i t Delta_pm^(k)): multiply coefficients by exp(-i t omega)."""
    if t == 0:
        return g
    c = g.coefficients() * free_phase(g.grid, g.k, t)
    return DenseKernel._wrap(g.k, g.grid, from_coefficients(c))


def tensor_from_wavefunction(
    phi: np.ndarray, k: int, grid: GridSpec, cap: int | None = None
) -> DenseKernel:
    """prod_j phi(x_j) * conj(phi(x'_j)) as a dense kernel."""
    phi = np.asarray(phi, dtype=complex)
    if phi.shape != grid.shape:
        raise ShapeMismatchError(f"wavefunction shape {phi.shape} != grid shape {grid.shape}")
    check_budget(grid, k, cap)
    return DenseKernel._wrap(k, grid, _outer([phi] * k + [np.conj(phi)] * k))


# symmetry ------------------------------------------------------------------

def _swap_axes(k: int, n: int) -> list[int]:
    return list(range(k * n, 2 * k * n)) + list(range(k * n))


def _slot_permutation_axes(sigma, k: int, n: int) -> list[int]:
    axes = []
    for block in (0, k):
        for s in sigma:
            axes.extend(range((block + s) * n, (block + s + 1) * n))
    return axes


def hermitian_conjugate(values: np.ndarray, k: int, n: int) -> np.ndarray:
    """(x; x') -> conj(gamma(x'; x))."""
    return np.conj(np.transpose(values, _swap_axes(k, n)))


def _relative(diff: np.ndarray, ref: np.ndarray) -> float:
    scale = np.max(np.abs(ref))
    if scale == 0:
        return float(np.max(np.abs(diff), initial=0.0))
    return float(np.max(np.abs(diff)) / scale)


def hermitian_defect(g: DenseKernel) -> float:
    """max |gamma(x;x') - conj gamma(x';x)| relative to max |gamma|."""
    return _relative(g.values - hermitian_conjugate(g.values, g.k, g.grid.n), g.values)


def permutation_defect(g: DenseKernel) -> float:
    worst = 0.0
    for sigma in itertools.permutations(range(g.k)):
        if sigma == tuple(range(g.k)):
            continue
        moved = np.transpose(g.values, _slot_permutation_axes(sigma, g.k, g.grid.n))
        worst = max(worst, _relative(g.values - moved, g.values))
    return worst


def symmetrize(values: np.ndarray, k: int, n: int) -> np.ndarray:
    """Project onto Hermitian, permutation-symmetric kernels."""
    perms = list(itertools.permutations(range(k)))
    acc = np.zeros_like(values)
    for sigma in perms:
        acc += np.transpose(values, _slot_permutation_axes(sigma, k, n))
    acc /= len(perms)
    return 0.5 * (acc + hermitian_conjugate(acc, k, n))
