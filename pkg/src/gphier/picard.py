"""Picard/Duhamel constructions for truncated hierarchies.

All time integrals are composite-trapezoid sums on one shared TimeGrid and are
evaluated in the interaction picture (see ``kernels.duhamel_accumulate``), so
the Picard iterate and the sum of its Duhamel terms agree algebraically.

The truncation at level ``K`` is closed by a :class:`ClosureSpec`.  Only the
collision image of the closure levels ever enters the iteration, so the
oracle closure builds those images directly from the separable rank-1
tensors of the NLS states and never materializes level ``K+1`` densely.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .collision import CollisionSpec, collide, collide_separable
from .errors import ConfigError, ShapeMismatchError
from .hierarchy import Hierarchy, node_quasi_norms, quasi_norm
from .kernel import (
    DenseKernel,
    ModelSpec,
    dispersion,
    from_coefficients,
    kernel_shape,
    norm_from_coefficients,
    tensor_from_wavefunction,
)
from .lowrank import SeparableKernel, to_dense
from .nls import WaveTrajectory
from .trajectory import TimeGrid, TrajectorySet


@dataclass(eq=False)
class ClosureSpec:
    kind: str = "zero"
    wave: WaveTrajectory | None = None

    def __post_init__(self):
        if self.kind not in ("zero", "oracle"):
            raise ConfigError(f"closure.kind must be zero or oracle, got {self.kind!r}")
        if self.kind == "oracle" and self.wave is None:
            raise ConfigError("oracle closure needs a wave trajectory")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def oracle(cls, wave: WaveTrajectory):
        return cls("oracle", wave)

    def check_against(self, gamma0: Hierarchy, tol: float = 1e-10):
        """Oracle closure must come from the same phi0 as the initial data."""
        if self.kind != "oracle":
            return
        g1 = gamma0.level(1)
        if isinstance(g1, SeparableKernel):
            g1 = to_dense(g1)
        ref = tensor_from_wavefunction(self.wave.states[0], 1, gamma0.grid)
        scale = max(np.max(np.abs(ref.values)), 1e-300)
        if np.max(np.abs(g1.values - ref.values)) > tol * scale:
            raise ConfigError("oracle closure does not match the factorized initial data")

    def source(self, k: int, t: float, spec: CollisionSpec, grid) -> np.ndarray:
        """Signed collision image of the closure at level ``k`` and time ``t``."""
        if self.kind == "zero":
            return np.zeros(kernel_shape(grid, k), dtype=complex)
        phi = self.wave.at(t)
        return _closure_image(phi, k, spec, grid)

    def sources(self, k: int, tg: TimeGrid, spec: CollisionSpec, grid) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros((len(tg),) + kernel_shape(grid, k), dtype=complex)
        return np.stack([_closure_image(p, k, spec, grid) for p in self.wave.at_nodes(tg)])


def _closure_image(phi, k, spec, grid):
    s = SeparableKernel.from_wavefunction(phi, k + spec.step, grid)
    return to_dense(collide_separable(s, spec)).values


# stack helpers -------------------------------------------------------------

def _fft_stack(stack: np.ndarray) -> np.ndarray:
    axes = tuple(range(1, stack.ndim))
    return np.fft.fftn(stack, axes=axes) / np.prod(stack.shape[1:])


def _ifft_stack(coeffs: np.ndarray) -> np.ndarray:
    axes = tuple(range(1, coeffs.ndim))
    return np.fft.ifftn(coeffs, axes=axes) * np.prod(coeffs.shape[1:])


def _free_coeffs(g0: DenseKernel, tg: TimeGrid) -> np.ndarray:
    c0 = g0.coefficients()
    om = dispersion(g0.grid, g0.k)
    return np.stack([c0 * np.exp(-1j * t * om) for t in tg.nodes])


def _duhamel_coeffs(src: np.ndarray, grid, k: int, dt: float) -> np.ndarray:
    """Fourier coefficients of the trapezoidal Duhamel integral of a physical stack."""
    shape = src.shape
    c = _fft_stack(src).reshape(shape[0], -1)
    acc = kernels.duhamel_accumulate(c, dispersion(grid, k).reshape(-1), dt)
    return acc.reshape(shape)


def _collide_stack(stack: np.ndarray, spec: CollisionSpec, grid, k_in: int) -> np.ndarray:
    if stack.strides[0] == 0:  # broadcast constant-in-time stack
        once = collide(DenseKernel._wrap(k_in, grid, stack[0]), spec).values
        return np.broadcast_to(once, (stack.shape[0],) + once.shape)
    return np.stack([collide(DenseKernel._wrap(k_in, grid, s), spec).values for s in stack])


def _dense_levels(gamma0: Hierarchy) -> list[DenseKernel]:
    out = []
    for g in gamma0.kernels:
        out.append(to_dense(g) if isinstance(g, SeparableKernel) else g)
    return out


@dataclass(eq=False)
class _Setup:
    gamma0: Hierarchy
    model: ModelSpec
    tg: TimeGrid
    closure: ClosureSpec
    spec: CollisionSpec = field(init=False)
    levels: list = field(init=False)
    _free: dict = field(init=False, default_factory=dict)
    _sources: dict = field(init=False, default_factory=dict)

    def __post_init__(self):
        self.spec = CollisionSpec.from_model(self.model)
        self.levels = _dense_levels(self.gamma0)
        self.closure.check_against(self.gamma0)

    @property
    def K(self):
        return self.gamma0.K

    @property
    def grid(self):
        return self.gamma0.grid

    @property
    def c(self):
        return self.spec.step

    def free(self, k):
        if k not in self._free:
            self._free[k] = _free_coeffs(self.levels[k - 1], self.tg)
        return self._free[k]

    def closure_source(self, k):
        if k not in self._sources:
            self._sources[k] = self.closure.sources(k, self.tg, self.spec, self.grid)
        return self._sources[k]

    def constant(self, k):
        g = self.levels[k - 1].values
        return np.broadcast_to(g, (len(self.tg),) + g.shape)

    def duhamel(self, src, k):
        return _duhamel_coeffs(src, self.grid, k, self.tg.dt)

    def collide(self, stack, k_in):
        return _collide_stack(stack, self.spec, self.grid, k_in)


def _trajectory(setup: _Setup, levels: dict, **meta) -> TrajectorySet:
    return TrajectorySet(setup.grid, setup.tg, setup.model, levels, setup.closure.kind, dict(meta))


# Picard iteration -------------------------------------------------------------

def _picard_step(setup: _Setup, prev: dict) -> dict:
    cur = {}
    for k in range(1, setup.K + 1):
        up = k + setup.c
        if up <= setup.K:
            src = setup.collide(prev[up], up)
        else:
            src = setup.closure_source(k)
        cur[k] = _ifft_stack(setup.free(k) + setup.duhamel(src, k))
    return cur


def picard_iterate(
    gamma0: Hierarchy, model: ModelSpec, tg: TimeGrid, closure: ClosureSpec, m: int
) -> TrajectorySet:
    """Depth-``m`` Picard iterate; depth 0 is the constant initial hierarchy."""
    if m < 0:
        raise ConfigError(f"Picard depth must be >= 0, got {m}")
    setup = _Setup(gamma0, model, tg, closure)
    prev = {k: setup.constant(k) for k in range(1, setup.K + 1)}
    for _ in range(m):
        prev = _picard_step(setup, prev)
    levels = {k: np.array(v) for k, v in prev.items()}
    return _trajectory(setup, levels, depth=m)


def picard_iterates(gamma0: Hierarchy, model: ModelSpec, tg: TimeGrid, closure: ClosureSpec):
    """Yield ``(m, levels)`` for m = 0, 1, 2, ...; ``levels[k]`` is a node stack."""
    setup = _Setup(gamma0, model, tg, closure)
    cur = {k: setup.constant(k) for k in range(1, setup.K + 1)}
    m = 0
    while True:
        yield m, cur
        cur = _picard_step(setup, cur)
        m += 1


@dataclass
class PicardResult:
    trajectory: TrajectorySet
    depth: int
    increments: list
    converged: bool


def picard_solve(
    gamma0: Hierarchy,
    model: ModelSpec,
    tg: TimeGrid,
    closure: ClosureSpec,
    max_depth: int = 32,
    tol: float = 1e-8,
) -> PicardResult:
    """Iterate until the increment quasi-norm drops below ``tol`` or ``max_depth``."""
    setup = _Setup(gamma0, model, tg, closure)
    increments = []
    converged = False
    prev = None
    for depth, cur in picard_iterates(gamma0, model, tg, closure):
        if prev is not None:
            inc = increment_quasi_norm(cur, prev, setup.grid, model.alpha)
            increments.append(inc)
            if inc < tol:
                converged = True
        if converged or depth >= max_depth:
            break
        prev = cur
    levels = {k: np.array(v) for k, v in cur.items()}
    return PicardResult(_trajectory(setup, levels, depth=depth), depth, increments, converged)


def _stack_norms(stack: np.ndarray, grid, k: int, alpha: float) -> np.ndarray:
    if stack.strides[0] == 0:
        c = np.fft.fftn(stack[0]) / stack[0].size
        return np.full(stack.shape[0], norm_from_coefficients(c, grid, k, alpha))
    coeffs = _fft_stack(stack)
    return np.array([norm_from_coefficients(c, grid, k, alpha) for c in coeffs])


def increment_norm_table(cur: dict, prev: dict, grid, alpha: float) -> np.ndarray:
    """``(K, M+1)`` table of level-wise H^alpha norms of ``cur - prev``."""
    return np.array([_stack_norms(cur[k] - prev[k], grid, k, alpha) for k in sorted(cur)])


def increment_quasi_norm(cur: dict, prev: dict, grid, alpha: float) -> float:
    """C([0,T]) quasi-norm of the difference of two iterates."""
    return float(np.max(node_quasi_norms(increment_norm_table(cur, prev, grid, alpha))))


def picard_sequence(
    gamma0: Hierarchy, model: ModelSpec, tg: TimeGrid, closure: ClosureSpec, mmax: int
) -> list[TrajectorySet]:
    """All iterates of depth 0..mmax (memory grows linearly in ``mmax``)."""
    setup = _Setup(gamma0, model, tg, closure)
    prev = {k: setup.constant(k) for k in range(1, setup.K + 1)}
    out = [_trajectory(setup, {k: np.array(v) for k, v in prev.items()}, depth=0)]
    for m in range(1, mmax + 1):
        prev = _picard_step(setup, prev)
        out.append(_trajectory(setup, {k: np.array(v) for k, v in prev.items()}, depth=m))
    return out


# Duhamel expansion -------------------------------------------------------------

def duhamel_term(
    gamma0: Hierarchy,
    k: int,
    j: int,
    tg: TimeGrid,
    model: ModelSpec,
    closure: ClosureSpec | None = None,
    depth: int | None = None,
    node: int | None = None,
):
    """j-fold iterated Duhamel term at level ``k``.

    Non-terminal terms act on freely evolved data at level ``k + c*j``; with
    ``j == depth`` the innermost datum is the constant initial kernel, matching
    the depth-0 convention of the Picard iteration.  Chains that reach the
    closure end in its collision image and vanish beyond it.  Returns the
    stack over all nodes, or a single DenseKernel when ``node`` is given.
    """
    if j < 0:
        raise ConfigError(f"Duhamel depth must be >= 0, got {j}")
    closure = ClosureSpec.zero() if closure is None else closure
    setup = _Setup(gamma0, model, tg, closure)
    if not 1 <= k <= setup.K:
        raise ConfigError(f"level {k} outside 1..{setup.K}")
    terminal = depth is not None and j == depth
    stack = _duhamel_chain(setup, k, j, terminal)
    if node is None:
        return stack
    return DenseKernel._wrap(k, setup.grid, stack[node])


def _duhamel_chain(setup: _Setup, level: int, r: int, terminal: bool) -> np.ndarray:
    if r == 0:
        if terminal:
            return np.array(setup.constant(level))
        return _ifft_stack(setup.free(level))
    up = level + setup.c
    if up > setup.K:
        if r == 1:
            return _ifft_stack(setup.duhamel(setup.closure_source(level), level))
        return np.zeros((len(setup.tg),) + kernel_shape(setup.grid, level), dtype=complex)
    inner = _duhamel_chain(setup, up, r - 1, terminal)
    return _ifft_stack(setup.duhamel(setup.collide(inner, up), level))


# Xi-hierarchy -------------------------------------------------------------------

def picard_xi(
    gamma0: Hierarchy, model: ModelSpec, tg: TimeGrid, closure: ClosureSpec, m: int
) -> TrajectorySet:
    """Iterate rho_m^(k) = C exp(it D) gamma0^(k+c) + int C exp(i(t-s) D) rho_{m-1}^(k+c).

    ``C`` is the signed collision operator; ``rho_0 = 0``.  Levels whose
    partner lies beyond the truncation take the closure's collision image.
    """
    if m < 0:
        raise ConfigError(f"depth must be >= 0, got {m}")
    setup = _Setup(gamma0, model, tg, closure)
    K, c = setup.K, setup.c
    shape_of = {k: (len(tg),) + kernel_shape(setup.grid, k) for k in range(1, K + 1)}
    rho = {k: np.zeros(shape_of[k], dtype=complex) for k in range(1, K + 1)}
    for _ in range(m):
        new = {}
        for k in range(1, K + 1):
            up = k + c
            if up > K:
                new[k] = np.array(setup.closure_source(k))
                continue
            inner = _ifft_stack(setup.free(up) + setup.duhamel(rho[up], up))
            new[k] = np.array(setup.collide(inner, up))
        rho = new
    return _trajectory(setup, rho, depth=m, kind="xi")


# direct exponential integrator -----------------------------------------------------

def _propagate_values(values: np.ndarray, grid, k: int, dt: float) -> np.ndarray:
    c = np.fft.fftn(values) / values.size
    return from_coefficients(c * np.exp(-1j * dt * dispersion(grid, k)))


def _sources_at(state: dict, t: float, setup: _Setup) -> dict:
    out = {}
    for k in state:
        up = k + setup.c
        if up <= setup.K:
            out[k] = collide(DenseKernel._wrap(up, setup.grid, state[up]), setup.spec).values
        else:
            out[k] = setup.closure.source(k, t, setup.spec, setup.grid)
    return out


def direct_step(state: dict, t: float, model: ModelSpec, closure: ClosureSpec, dt: float, grid=None) -> dict:
    """One exponential-trapezoid (Heun) step of the truncated hierarchy.

    ``state`` maps level ``k`` to the kernel values at time ``t``.  Predictor
    ``g* = E(g + dt*C g+)``; corrector ``E g + dt/2 (E C g+(t) + C g*+(t+dt))``
    with ``E = exp(i dt Delta_pm)``.
    """
    if not dt > 0:
        raise ConfigError(f"step must be positive, got {dt}")
    if grid is None:
        first = next(iter(state.values()))
        grid = first.grid if isinstance(first, DenseKernel) else None
    state = {k: (v.values if isinstance(v, DenseKernel) else np.asarray(v)) for k, v in state.items()}
    if grid is None:
        raise ConfigError("direct_step needs the grid when state holds raw arrays")
    setup = _StepSetup(model, closure, grid, len(state))
    src0 = _sources_at(state, t, setup)
    pred = {k: _propagate_values(state[k] + dt * src0[k], grid, k, dt) for k in state}
    src1 = _sources_at(pred, t + dt, setup)
    out = {}
    for k in state:
        out[k] = _propagate_values(state[k] + 0.5 * dt * src0[k], grid, k, dt) + 0.5 * dt * src1[k]
    return out


@dataclass(eq=False)
class _StepSetup:
    model: ModelSpec
    closure: ClosureSpec
    grid: object
    K: int

    def __post_init__(self):
        self.spec = CollisionSpec.from_model(self.model)

    @property
    def c(self):
        return self.spec.step


def direct_solve(gamma0: Hierarchy, model: ModelSpec, tg: TimeGrid, closure: ClosureSpec) -> TrajectorySet:
    """March ``direct_step`` across the time grid."""
    setup = _Setup(gamma0, model, tg, closure)
    state = {k: g.values for k, g in enumerate(setup.levels, start=1)}
    stacks = {k: np.empty((len(tg),) + v.shape, dtype=complex) for k, v in state.items()}
    for k in state:
        stacks[k][0] = state[k]
    for i, t in enumerate(tg.nodes[:-1], start=1):
        state = direct_step(state, t, model, closure, tg.dt, grid=setup.grid)
        for k in state:
            stacks[k][i] = state[k]
    return _trajectory(setup, stacks, solver="direct")


# residual verification ---------------------------------------------------------------

@dataclass
class ResidualReport:
    levels: list
    dt: float
    closure: str

    @property
    def max_residual(self) -> float:
        return max(r["max_residual"] for r in self.levels)

    @property
    def max_relative(self) -> float:
        return max(r["relative"] for r in self.levels)

    @property
    def quadrature_scale(self) -> float:
        return self.dt**2

    def as_dict(self) -> dict:
        return {
            "levels": self.levels,
            "dt": self.dt,
            "dt_squared": self.quadrature_scale,
            "max_residual": self.max_residual,
            "max_relative": self.max_relative,
            "closure": self.closure,
        }


def verify_solution(
    traj: TrajectorySet, gamma0: Hierarchy, model: ModelSpec, closure: ClosureSpec
) -> ResidualReport:
    """Mild-form residual gamma_t - [free + Duhamel(C gamma^(k+c))] at every node."""
    if traj.K != gamma0.K:
        raise ShapeMismatchError(f"trajectory has K={traj.K}, initial data K={gamma0.K}")
    setup = _Setup(gamma0, model, traj.tg, closure)
    alpha = model.alpha
    stacks = {}
    for k in range(1, traj.K + 1):
        lv = traj.levels[k]
        stacks[k] = lv if isinstance(lv, np.ndarray) else np.stack([to_dense(s).values for s in lv])
    rows = []
    for k in range(1, traj.K + 1):
        up = k + setup.c
        src = setup.collide(stacks[up], up) if up <= setup.K else setup.closure_source(k)
        mild = setup.free(k) + setup.duhamel(src, k)
        res = _fft_stack(stacks[k]) - mild
        norms = np.array([norm_from_coefficients(r, setup.grid, k, alpha) for r in res])
        ref = _stack_norms(stacks[k], setup.grid, k, alpha)
        worst = int(np.argmax(norms))
        scale = float(np.max(ref))
        rows.append(
            {
                "level": k,
                "max_residual": float(norms[worst]),
                "worst_node": worst,
                "worst_time": float(traj.tg.nodes[worst]),
                "relative": float(norms[worst] / scale) if scale > 0 else float(norms[worst]),
                "per_node": norms.tolist(),
            }
        )
    return ResidualReport(rows, traj.tg.dt, closure.kind)


# horizons -------------------------------------------------------------------------------

def theorem_horizon(Chat: float, q: float, interaction: str = "cubic") -> float:
    """T = 1/(4 C q) (cubic) or 1/(4 C q^2) (quintic); infinite for q = 0."""
    if q == 0:
        return math.inf
    if not Chat > 0:
        raise ConfigError(f"horizon needs a positive constant estimate, got {Chat}")
    power = 1 if interaction == "cubic" else 2
    return 1.0 / (4.0 * Chat * q**power)


def relative_level_errors(traj: TrajectorySet, ref: TrajectorySet, alpha: float | None = None) -> np.ndarray:
    """Per level: max over nodes of ||traj - ref|| / ||ref|| (absolute where ref = 0)."""
    alpha = traj.model.alpha if alpha is None else alpha
    out = []
    for k in range(1, traj.K + 1):
        a = traj.levels[k]
        b = ref.levels[k]
        if not isinstance(b, np.ndarray):
            b = np.stack([to_dense(s).values for s in b])
        diff = _stack_norms(a - b, traj.grid, k, alpha)
        base = _stack_norms(b, traj.grid, k, alpha)
        # absolute error where the reference level vanishes
        rel = np.divide(diff, base, out=diff.copy(), where=base > 0)
        out.append(float(np.max(rel)))
    return np.array(out)


def quasi_norm_series(traj: TrajectorySet, alpha: float | None = None) -> np.ndarray:
    return node_quasi_norms(traj.norm_table(alpha))


__all__ = [
    "ClosureSpec",
    "PicardResult",
    "ResidualReport",
    "TimeGrid",
    "TrajectorySet",
    "direct_solve",
    "direct_step",
    "duhamel_term",
    "increment_norm_table",
    "increment_quasi_norm",
    "picard_iterate",
    "picard_iterates",
    "picard_sequence",
    "picard_solve",
    "picard_xi",
    "quasi_norm",
    "quasi_norm_series",
    "relative_level_errors",
    "theorem_horizon",
    "verify_solution",
]
