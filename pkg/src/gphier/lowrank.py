"""Separable kernels sum_r c_r prod_j a_{r,j}(x_j) conj(b_{r,j}(x'_j)).

Factors are stored in physical space as arrays of shape ``(r, k, *grid.shape)``.
Rank never shrinks automatically: exceeding ``rank_cap`` raises.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, RankCapError, ShapeMismatchError
from .grid import TWO_PI, GridSpec
from .kernel import DenseKernel, _outer, check_budget

DEFAULT_RANK_CAP = 4096


@dataclass(frozen=True, eq=False)
class SeparableKernel:
    k: int
    grid: GridSpec
    coeffs: np.ndarray
    left: np.ndarray
    right: np.ndarray
    rank_cap: int = DEFAULT_RANK_CAP

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.complex128).reshape(-1)
        r = coeffs.shape[0]
        fshape = (r, self.k) + self.grid.shape
        left = np.asarray(self.left, dtype=np.complex128).reshape(fshape)
        right = np.asarray(self.right, dtype=np.complex128).reshape(fshape)
        if r > self.rank_cap:
            raise RankCapError(f"rank {r} exceeds rank cap {self.rank_cap}")
        for name, arr in (("coeffs", coeffs), ("left", left), ("right", right)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def rank(self) -> int:
        return self.coeffs.shape[0]

    @classmethod
    def zero(cls, grid: GridSpec, k: int, rank_cap: int = DEFAULT_RANK_CAP):
        empty = np.zeros((0, k) + grid.shape, dtype=complex)
        return cls(k, grid, np.zeros(0, dtype=complex), empty, empty, rank_cap)

    @classmethod
    def from_wavefunction(cls, phi, k: int, grid: GridSpec, rank_cap: int = DEFAULT_RANK_CAP):
        """Rank-1 factorized kernel prod_j phi(x_j) conj(phi(x'_j))."""
        phi = np.asarray(phi, dtype=complex)
        if phi.shape != grid.shape:
            raise ShapeMismatchError(f"wavefunction shape {phi.shape} != grid shape {grid.shape}")
        f = np.broadcast_to(phi, (1, k) + grid.shape)
        return cls(k, grid, np.ones(1, dtype=complex), f, f, rank_cap)

    def _check_compatible(self, other: "SeparableKernel"):
        if not isinstance(other, SeparableKernel):
            raise TypeError(f"expected SeparableKernel, got {type(other).__name__}")
        if other.k != self.k or other.grid != self.grid:
            raise ShapeMismatchError(
                f"separable kernels differ: k={self.k} vs {other.k}, grid {self.grid} vs {other.grid}"
            )

    def scaled(self, scalar) -> "SeparableKernel":
        return SeparableKernel(
            self.k, self.grid, self.coeffs * complex(scalar), self.left, self.right, self.rank_cap
        )

    def __mul__(self, scalar):
        return self.scaled(scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self.scaled(-1.0)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, -other)


def add(s1: SeparableKernel, s2: SeparableKernel) -> SeparableKernel:
    """Concatenate term lists; the rank cap of ``s1`` applies."""
    s1._check_compatible(s2)
    r = s1.rank + s2.rank
    if r > s1.rank_cap:
        raise RankCapError(f"sum has rank {r}, exceeding rank cap {s1.rank_cap}")
    return SeparableKernel(
        s1.k,
        s1.grid,
        np.concatenate([s1.coeffs, s2.coeffs]),
        np.concatenate([s1.left, s2.left]),
        np.concatenate([s1.right, s2.right]),
        s1.rank_cap,
    )


def to_dense(s: SeparableKernel, cap: int | None = None) -> DenseKernel:
    check_budget(s.grid, s.k, cap)
    out = DenseKernel.zeros(s.grid, s.k, cap).values.copy()
    for c, a, b in zip(s.coeffs, s.left, s.right):
        out += c * _outer(list(a) + list(np.conj(b)))
    return DenseKernel._wrap(s.k, s.grid, out)


def factor_gram(f: np.ndarray, grid: GridSpec, alpha: float) -> np.ndarray:
    """G[r, r'] = <f_r, f_r'>_{H^alpha} for factors of shape ``(r, *grid.shape)``."""
    r = f.shape[0]
    c = grid.to_coefficients(f).reshape(r, -1)
    w2 = (grid.weights(alpha) ** 2).reshape(-1)
    return TWO_PI**grid.n * (c * w2) @ c.conj().T


def merge_duplicates(s: SeparableKernel) -> SeparableKernel:
    """Sum the coefficients of terms whose factors are bitwise identical.

    Exact: no approximation is made, but cancelling pairs such as ``s - s``
    collapse before the Gram form, which would otherwise lose half the digits.
    """
    index: dict = {}
    coeffs, keep = [], []
    for i in range(s.rank):
        key = s.left[i].tobytes() + s.right[i].tobytes()
        if key in index:
            coeffs[index[key]] += s.coeffs[i]
        else:
            index[key] = len(keep)
            keep.append(i)
            coeffs.append(complex(s.coeffs[i]))
    if len(keep) == s.rank:
        return s
    c = np.array(coeffs, dtype=complex)
    nz = [n for n, v in enumerate(c) if v != 0]
    idx = [keep[n] for n in nz]
    return SeparableKernel(s.k, s.grid, c[nz], s.left[idx], s.right[idx], s.rank_cap)


def gram_form(s: SeparableKernel, alpha: float) -> complex:
    """Quadratic form sum c_r conj(c_r') prod_j <a_rj, a_r'j> <b_r'j, b_rj>."""
    s = merge_duplicates(s)
    if s.rank == 0:
        return 0.0j
    prod = np.ones((s.rank, s.rank), dtype=complex)
    for j in range(s.k):
        ga = factor_gram(s.left[:, j], s.grid, alpha)
        gb = factor_gram(s.right[:, j], s.grid, alpha)
        prod *= ga * gb.T
    return complex(s.coeffs @ prod @ s.coeffs.conj())


def gram_norm(s: SeparableKernel, alpha: float) -> float:
    q = gram_form(s, alpha)
    scale = float(np.sum(np.abs(s.coeffs)) ** 2) if s.rank else 0.0
    if q.real < -1e-10 * max(scale, 1.0):
        raise NumericalError(f"Gram quadratic form is negative ({q.real:.3e}); inconsistent factors")
    return float(np.sqrt(max(q.real, 0.0)))


def propagate_separable(s: SeparableKernel, t: float) -> SeparableKernel:
    """Slot-wise free evolution: exp(-i t |p|^2) on left, exp(+i t |p|^2) on right."""
    if t == 0 or s.rank == 0:
        return s
    g = s.grid
    phase = np.exp(-1j * t * g.p_squared)
    left = g.from_coefficients(g.to_coefficients(s.left) * phase)
    right = g.from_coefficients(g.to_coefficients(s.right) * phase)
    # conj(b) evolves with exp(+i t |p|^2), i.e. b itself with exp(-i t |p|^2)
    return SeparableKernel(s.k, g, s.coeffs, left, right, s.rank_cap)
