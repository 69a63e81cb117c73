"""Periodic grid on [0, 2*pi)^n and Fourier bookkeeping.

Grid functions are sampled at ``x = i*h`` with ``h = 2*pi/N``.  Fourier
coefficients use the convention ``f(x) = sum_p c_p exp(i p.x)``, so that
``c = fftn(f) / N**n`` and the grid L2 norm ``h**n * sum |f|**2`` equals
``(2*pi)**n * sum |c_p|**2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class GridSpec:
    n: int
    N: int
    L: float = field(default=TWO_PI, init=False)

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ConfigError(f"grid.n must be 1 or 2, got {self.n!r}")
        if not isinstance(self.N, (int, np.integer)) or self.N < 4 or self.N % 2:
            raise ConfigError(f"grid.N must be an even integer >= 4, got {self.N!r}")

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        """Shape of one single-particle grid function."""
        return (self.N,) * self.n

    @property
    def points(self) -> int:
        return self.N**self.n

    @cached_property
    def frequencies(self) -> np.ndarray:
        """Integer frequency axis in FFT order (a permutation of -N/2..N/2-1)."""
        return np.fft.fftfreq(self.N, d=1.0 / self.N).round().astype(np.int64)

    @cached_property
    def frequency_axis(self) -> np.ndarray:
        """Sorted integer frequency axis -N/2..N/2-1."""
        return np.arange(-self.N // 2, self.N // 2, dtype=np.int64)

    @cached_property
    def p_squared(self) -> np.ndarray:
        """|p|^2 on the single-particle frequency grid (FFT order)."""
        axes = np.meshgrid(*([self.frequencies] * self.n), indexing="ij")
        return sum(a.astype(float) ** 2 for a in axes)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        x = np.arange(self.N) * self.h
        return tuple(np.meshgrid(*([x] * self.n), indexing="ij"))

    def weights(self, alpha: float) -> np.ndarray:
        """Per-slot Sobolev weights w_alpha(p) in FFT order."""
        return (1.0 + self.p_squared) ** (alpha / 2.0)

    # single-particle transforms -------------------------------------------
    def to_coefficients(self, f: np.ndarray) -> np.ndarray:
        return np.fft.fftn(f, axes=tuple(range(-self.n, 0))) / self.points

    def from_coefficients(self, c: np.ndarray) -> np.ndarray:
        return np.fft.ifftn(c, axes=tuple(range(-self.n, 0))) * self.points

    def l2_norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(self.h**self.n * np.sum(np.abs(f) ** 2)))

    def h_alpha_norm(self, f: np.ndarray, alpha: float) -> float:
        """Single-particle H^alpha norm of a grid function."""
        c = self.to_coefficients(f)
        w = self.weights(alpha)
        return float(np.sqrt(TWO_PI**self.n * np.sum(w**2 * np.abs(c) ** 2)))

    def h_alpha_inner(self, f: np.ndarray, g: np.ndarray, alpha: float) -> complex:
        """<f, g>_{H^alpha}, linear in f and antilinear in g."""
        cf, cg = self.to_coefficients(f), self.to_coefficients(g)
        w2 = self.weights(alpha) ** 2
        return complex(TWO_PI**self.n * np.sum(w2 * cf * np.conj(cg)))

    def wavefunction(self, modes) -> np.ndarray:
        """Grid function sum_p c_p exp(i p.x) from ``[(p, c), ...]`` pairs."""
        f = np.zeros(self.shape, dtype=complex)
        for p, c in modes:
            p = np.atleast_1d(np.asarray(p, dtype=float))
            if p.size != self.n:
                raise ConfigError(f"mode {p.tolist()} does not match grid dimension {self.n}")
            phase = sum(pi * xi for pi, xi in zip(p, self.coords))
            f = f + complex(c) * np.exp(1j * phase)
        return f


def make_grid(n: int, N: int) -> GridSpec:
    return GridSpec(n, N)


def sobolev_weight(p, alpha: float) -> float:
    """(1 + |p|^2)^(alpha/2) for an integer multi-index ``p``."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    return float((1.0 + np.dot(p, p)) ** (alpha / 2.0))
