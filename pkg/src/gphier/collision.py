"""Contact-interaction collision operators.

On the grid each delta contraction is an exact index substitution: the trace
slot(s) of the higher-level kernel are restricted to the grid point of slot
``j`` (or its primed partner).  Unsigned operators ``b*``/``q*`` never carry the
``-i mu`` factor; ``b_full``/``q_full`` apply it once when ``signed=True``.
"""
from __future__ import annotations

import string
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, RankCapError, ShapeMismatchError
from .kernel import DenseKernel, ModelSpec
from .lowrank import SeparableKernel

_LETTERS = string.ascii_letters


@dataclass(frozen=True)
class CollisionSpec:
    interaction: str = "cubic"
    mu: int = 1

    @classmethod
    def from_model(cls, model: ModelSpec) -> "CollisionSpec":
        return cls(model.interaction, model.mu)

    @property
    def step(self) -> int:
        return 1 if self.interaction == "cubic" else 2

    @property
    def sign(self) -> complex:
        return -1j * self.mu


def _check(j: int, g, step: int):
    k = g.k - step
    if k < 1:
        raise ShapeMismatchError(f"input particle number {g.k} too small for a level-{step} contraction")
    if not 1 <= j <= k:
        raise ConfigError(f"slot index j={j} out of range 1..{k}")
    return k


def _restrict(g: DenseKernel, j: int, step: int, primed: bool) -> DenseKernel:
    """Glue all trace slots (x_l, x'_l, l > k) to slot j (or j')."""
    k = _check(j, g, step)
    n = g.grid.n
    K = g.k

    def letters(slot):
        return _LETTERS[slot * n:(slot + 1) * n]

    # output slots: unprimed 0..k-1 -> 0..k-1, primed 0..k-1 -> k..2k-1
    target = letters(k + j - 1) if primed else letters(j - 1)
    sub_in = []
    for s in range(K):
        sub_in.append(letters(s) if s < k else target)
    for s in range(K):
        sub_in.append(letters(k + s) if s < k else target)
    sub_out = "".join(letters(s) for s in range(2 * k))
    out = np.einsum("".join(sub_in) + "->" + sub_out, g.values)
    return DenseKernel._wrap(k, g.grid, np.array(out, dtype=complex))


def b1(j: int, g: DenseKernel) -> DenseKernel:
    """Restriction x_{k+1} = x'_{k+1} = x_j."""
    return _restrict(g, j, 1, primed=False)


def b2(j: int, g: DenseKernel) -> DenseKernel:
    """Restriction x_{k+1} = x'_{k+1} = x'_j."""
    return _restrict(g, j, 1, primed=True)


def b_jk(j: int, g: DenseKernel) -> DenseKernel:
    return b1(j, g) - b2(j, g)


def q1(j: int, g: DenseKernel) -> DenseKernel:
    return _restrict(g, j, 2, primed=False)


def q2(j: int, g: DenseKernel) -> DenseKernel:
    return _restrict(g, j, 2, primed=True)


def q_jk(j: int, g: DenseKernel) -> DenseKernel:
    return q1(j, g) - q2(j, g)


def _full(op, step: int, g: DenseKernel, spec: CollisionSpec | None, signed: bool) -> DenseKernel:
    k = g.k - step
    _check(1, g, step)
    acc = op(1, g).values.copy()
    for j in range(2, k + 1):
        acc += op(j, g).values
    if signed:
        if spec is None:
            raise ConfigError("signed collision requires a CollisionSpec")
        acc *= spec.sign
    return DenseKernel._wrap(k, g.grid, acc)


def b_full(g: DenseKernel, spec: CollisionSpec | None = None, signed: bool = True) -> DenseKernel:
    """B^(k) = sum_j B_{j,k}; multiplied by -i mu when ``signed``."""
    return _full(b_jk, 1, g, spec, signed)


def q_full(g: DenseKernel, spec: CollisionSpec | None = None, signed: bool = True) -> DenseKernel:
    """Q^(k) = sum_j Q_{j,k}; multiplied by -i mu when ``signed``."""
    return _full(q_jk, 2, g, spec, signed)


def collide(g: DenseKernel, spec: CollisionSpec, signed: bool = True) -> DenseKernel:
    """Signed (by default) collision operator of the interaction in ``spec``."""
    if spec.step == 1:
        return b_full(g, spec, signed)
    return q_full(g, spec, signed)


# separable variants ---------------------------------------------------------


def _full_separable(s: SeparableKernel, step: int, spec: CollisionSpec | None, signed: bool) -> SeparableKernel:
    k = s.k - step
    _check(1, s, step)
    r = s.rank
    out_rank = 2 * k * r
    if out_rank > s.rank_cap:
        raise RankCapError(f"collision output rank {out_rank} exceeds rank cap {s.rank_cap}")
    if r == 0:
        return SeparableKernel.zero(s.grid, k, s.rank_cap)
    # pointwise weight carried by the trace slots: prod_l a_l conj(b_l), l > k
    trace = np.prod(s.left[:, k:] * np.conj(s.right[:, k:]), axis=1)
    base_l = s.left[:, :k]
    base_r = s.right[:, :k]
    coeffs, lefts, rights = [], [], []
    sign = spec.sign if signed else 1.0
    if signed and spec is None:
        raise ConfigError("signed collision requires a CollisionSpec")
    for j in range(k):
        lj = base_l.copy()
        lj[:, j] = lj[:, j] * trace
        coeffs.append(s.coeffs * sign)
        lefts.append(lj)
        rights.append(base_r)
        rj = base_r.copy()
        rj[:, j] = rj[:, j] * np.conj(trace)
        coeffs.append(-s.coeffs * sign)
        lefts.append(base_l)
        rights.append(rj)
    return SeparableKernel(
        k,
        s.grid,
        np.concatenate(coeffs),
        np.concatenate(lefts),
        np.concatenate(rights),
        s.rank_cap,
    )


def b_full_separable(s: SeparableKernel, spec: CollisionSpec | None = None, signed: bool = True) -> SeparableKernel:
    return _full_separable(s, 1, spec, signed)


def q_full_separable(s: SeparableKernel, spec: CollisionSpec | None = None, signed: bool = True) -> SeparableKernel:
    return _full_separable(s, 2, spec, signed)


def collide_separable(s: SeparableKernel, spec: CollisionSpec, signed: bool = True) -> SeparableKernel:
    if spec.step == 1:
        return b_full_separable(s, spec, signed)
    return q_full_separable(s, spec, signed)
