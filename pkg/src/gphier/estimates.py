"""Empirical constants, envelopes and convergence tables.

The collision bound constant is estimated per grid from random symmetric
kernels whose Fourier coefficients decay like a Sobolev function slightly
smoother than the target regularity.  Nothing here extrapolates to the
continuum.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .collision import b_jk, q_jk
from .errors import ConfigError
from .grid import GridSpec, make_grid
from .hierarchy import Hierarchy, as_norm_sequence, node_quasi_norms, quasi_norm
from .kernel import (
    DENSE_ENTRY_CAP,
    DenseKernel,
    ModelSpec,
    _outer,
    dispersion,
    from_coefficients,
    h_alpha_norm,
    kernel_entries,
    symmetrize,
)
from .picard import ClosureSpec, increment_norm_table, picard_iterates
from .trajectory import TimeGrid

SOBOLEV_MARGIN = 0.25
MIN_SAMPLES = 10
# below this the previous increment counts as exactly converged
ZERO_INCREMENT = 0.0


@dataclass
class ConstantEstimate:
    interaction: str
    alpha: float
    grid: GridSpec
    samples: int
    seed: int
    ratios: dict
    rows: list = field(repr=False, default_factory=list)
    skipped: tuple = ()

    @property
    def Chat(self) -> float:
        return max(self.ratios.values()) if self.ratios else 0.0

    def summary(self) -> dict:
        return {
            "interaction": self.interaction,
            "alpha": self.alpha,
            "n": self.grid.n,
            "N": self.grid.N,
            "samples": self.samples,
            "seed": self.seed,
            "Chat": self.Chat,
            "per_slot": {f"{k},{j}": v for (k, j), v in sorted(self.ratios.items())},
            "skipped_levels": list(self.skipped),
        }

    def to_csv(self) -> str:
        """Rows ``k,j,sample,ratio``; the last row is ``summary,,<samples>,<Chat>``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "j", "sample", "ratio"])
        for k, j, s, r in self.rows:
            w.writerow([k, j, s, repr(float(r))])
        w.writerow(["summary", "", self.samples, repr(float(self.Chat))])
        return buf.getvalue()


def random_symmetric_kernel(grid: GridSpec, k: int, alpha: float, rng: np.random.Generator) -> DenseKernel:
    """Hermitian, permutation-symmetric kernel with Sobolev-decaying coefficients."""
    shape = (grid.N,) * (2 * k * grid.n)
    decay = grid.weights(alpha + grid.n / 2 + SOBOLEV_MARGIN) ** -1.0
    std = _outer([decay] * (2 * k))
    c = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * std
    values = symmetrize(from_coefficients(c), k, grid.n)
    return DenseKernel._wrap(k, grid, values)


def _ratio(op, j, g, alpha, denom):
    if denom == 0:
        return None
    return h_alpha_norm(op(j, g), alpha) / denom


def _sample_ratios(args):
    interaction, alpha, grid, levels, seed_seq = args
    rng = np.random.default_rng(seed_seq)
    step = 1 if interaction == "cubic" else 2
    op = b_jk if step == 1 else q_jk
    out = []
    for k in levels:
        g = random_symmetric_kernel(grid, k + step, alpha, rng)
        denom = h_alpha_norm(g, alpha)
        for j in range(1, k + 1):
            r = _ratio(op, j, g, alpha, denom)
            if r is not None:
                out.append((k, j, r))
    return out


def estimate_constant(
    model: ModelSpec,
    grid: GridSpec,
    alpha: float | None = None,
    samples: int = 100,
    seed: int = 0,
    levels=(1, 2),
    workers: int = 1,
    cap: int | None = None,
) -> ConstantEstimate:
    """Max over random kernels of ||B_jk g|| / ||g|| (Q_jk for quintic).

    Output levels whose input kernel exceeds the dense budget are skipped and
    listed in ``skipped``.  Sample ``s`` uses the ``s``-th child of
    ``SeedSequence(seed)``, so results do not depend on ``workers``.
    """
    alpha = model.alpha if alpha is None else float(alpha)
    if int(samples) != samples or samples < MIN_SAMPLES:
        raise ConfigError(f"estimate.samples must be an integer >= {MIN_SAMPLES}, got {samples}")
    if alpha <= grid.n / 2:
        warnings.warn(f"alpha={alpha} <= n/2: outside the bounded-collision regime", stacklevel=2)
    cap = DENSE_ENTRY_CAP if cap is None else cap
    step = model.step
    used, skipped = [], []
    for k in levels:
        (used if kernel_entries(grid, k + step) <= cap else skipped).append(int(k))
    children = np.random.SeedSequence(seed).spawn(samples)
    tasks = [(model.interaction, alpha, grid, tuple(used), c) for c in children]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_sample_ratios, tasks))
    else:
        results = [_sample_ratios(t) for t in tasks]
    rows, ratios = [], {}
    for s, res in enumerate(results):
        for k, j, r in res:
            rows.append((k, j, s, r))
            ratios[(k, j)] = max(ratios.get((k, j), 0.0), r)
    return ConstantEstimate(model.interaction, alpha, grid, samples, seed, ratios, rows, tuple(skipped))


def refinement_table(model: ModelSpec, n: int, Ns, samples: int = 100, seed: int = 0, **kw) -> dict:
    """``{N: Chat}`` on successively finer grids with a shared seed."""
    return {int(N): estimate_constant(model, make_grid(n, N), samples=samples, seed=seed, **kw).Chat for N in Ns}


# envelopes ---------------------------------------------------------------------

LOG_SPACE_ABOVE = 30
_LOG_MAX = math.log(np.finfo(float).max)


def envelope_coefficient(k: int, j: int, step: int = 1) -> float:
    """prod_{i<j} (k + step*i) / j!, i.e. binom(k+j-1, j) for ``step = 1``."""
    if j <= LOG_SPACE_ABOVE:
        num = 1
        for i in range(j):
            num *= k + step * i
        return num / math.factorial(j)
    return math.exp(log_envelope_coefficient(k, j, step))


def log_envelope_coefficient(k: int, j: int, step: int = 1) -> float:
    if step == 1:
        return math.lgamma(k + j) - math.lgamma(k) - math.lgamma(j + 1)
    return sum(math.log(k + step * i) for i in range(j)) - math.lgamma(j + 1)


def binomial_envelope(k: int, j: int, t: float, Chat: float, a, step: int = 1) -> float:
    """coef(k, j) * (Chat t)^j * a_{k + step*j}; ``a`` is 1-indexed by level."""
    a = as_norm_sequence(a)
    idx = k + step * j
    if k < 1 or j < 0 or idx > a.size:
        raise ConfigError(f"level {idx} outside the norm sequence of length {a.size}")
    if j == 0:
        return float(a[k - 1])
    x = Chat * t
    if a[idx - 1] == 0 or x == 0:
        return 0.0
    if j <= LOG_SPACE_ABOVE:
        return envelope_coefficient(k, j, step) * x**j * float(a[idx - 1])
    log_val = log_envelope_coefficient(k, j, step) + j * math.log(x) + math.log(a[idx - 1])
    return math.exp(log_val) if log_val < _LOG_MAX else math.inf


def stirling_surrogate(j: int) -> float:
    """4^j / sqrt(j), the central-binomial growth rate."""
    return 4.0**j / math.sqrt(j)


def stirling_bracket(j: int) -> tuple[float, float]:
    root = math.sqrt(math.pi * j)
    return 0.9 * 4.0**j / (2.0 * root), 1.1 * 4.0**j / root


def check_stirling(jmax: int = 20) -> bool:
    """binom(2j-1, j) lies in the widened Stirling bracket for 2 <= j <= jmax."""
    for j in range(2, jmax + 1):
        lo, hi = stirling_bracket(j)
        if not lo <= math.comb(2 * j - 1, j) <= hi:
            return False
    return True


# space-time window observable ---------------------------------------------------

def spacetime_window_norm(
    g: DenseKernel, j: int, alpha: float, T: float, M: int, t0: float = 0.0, interaction: str = "cubic"
) -> float:
    """Trapezoidal (int_{t0}^{t0+T} ||B_jk e^{it D} g||^2 dt)^(1/2).

    A finite-window quantity only: free evolution on the torus is
    2*pi-periodic in time, so the whole-line integral diverges.
    """
    if not T > 0:
        raise ConfigError(f"window length must be positive, got {T}")
    if int(M) != M or M < 2:
        raise ConfigError(f"window needs M >= 2, got {M}")
    op = b_jk if interaction == "cubic" else q_jk
    c0 = g.coefficients()
    om = dispersion(g.grid, g.k)
    ts = t0 + np.arange(M + 1) * (T / M)
    vals = np.empty(M + 1)
    for i, t in enumerate(ts):
        gt = DenseKernel._wrap(g.k, g.grid, from_coefficients(c0 * np.exp(-1j * t * om)))
        vals[i] = h_alpha_norm(op(j, gt), alpha) ** 2
    dt = T / M
    return math.sqrt(dt * (vals[1:-1].sum() + 0.5 * (vals[0] + vals[-1])))


# convergence report ------------------------------------------------------------------

@dataclass
class ConvergenceRow:
    m: int
    increment: float
    ratio: float
    envelope: float

    def as_list(self):
        return [self.m, repr(self.increment), repr(self.ratio), repr(self.envelope)]


def _ratio_of(cur: float, prev: float) -> float:
    if prev > ZERO_INCREMENT:
        return cur / prev
    return 0.0 if cur <= ZERO_INCREMENT else math.inf


def extended_norms(gamma0: Hierarchy, closure: ClosureSpec, tg: TimeGrid, step: int, alpha: float) -> np.ndarray:
    """Level norms 1..K+step; closure levels use the sup over nodes."""
    a = list(gamma0.norms(alpha))
    K = gamma0.K
    for lev in range(K + 1, K + step + 1):
        if closure.kind == "zero":
            a.append(0.0)
        else:
            grid = gamma0.grid
            sup = max(grid.h_alpha_norm(p, alpha) for p in closure.wave.at_nodes(tg))
            a.append(sup ** (2 * lev))
    return np.array(a)


def increment_envelope(m: int, T: float, Chat: float, a: np.ndarray, K: int, step: int) -> float:
    """Quasi-norm of the level sequence 2*E(k, m-1) + E(k, m), E the binomial envelope.

    Chains that pass beyond the closure contribute nothing.
    """
    def env(k, j):
        if j < 0:
            return 0.0
        # the first level of the chain beyond K must be the last one
        if k + step * (j - 1) > K:
            return 0.0
        return binomial_envelope(k, j, T, Chat, a, step)

    seq = [2.0 * env(k, m - 1) + env(k, m) for k in range(1, K + 1)]
    return quasi_norm(seq).value


def convergence_report(
    gamma0: Hierarchy, model: ModelSpec, tg: TimeGrid, closure: ClosureSpec, mmax: int, Chat: float
) -> list[ConvergenceRow]:
    """Rows m = 1..mmax: increment C([0,T]) quasi-norm, ratio to the previous row, envelope.

    A ratio of ``0.0`` means the increment vanished after a vanishing
    predecessor (the truncated iteration has become stationary).
    """
    if mmax < 1:
        raise ConfigError(f"mmax must be >= 1, got {mmax}")
    alpha = model.alpha
    a = extended_norms(gamma0, closure, tg, model.step, alpha)
    rows = []
    prev_levels = None
    prev_inc = None
    for m, levels in picard_iterates(gamma0, model, tg, closure):
        if prev_levels is not None:
            table = increment_norm_table(levels, prev_levels, gamma0.grid, alpha)
            inc = float(np.max(node_quasi_norms(table)))
            ratio = math.nan if prev_inc is None else _ratio_of(inc, prev_inc)
            env = increment_envelope(m, tg.T, Chat, a, gamma0.K, model.step)
            rows.append(ConvergenceRow(m, inc, ratio, env))
            prev_inc = inc
        if m >= mmax:
            break
        prev_levels = levels
    return rows


def convergence_csv(rows: list[ConvergenceRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["m", "increment", "ratio", "envelope"])
    for r in rows:
        w.writerow(r.as_list())
    return buf.getvalue()


__all__ = [
    "ConstantEstimate",
    "ConvergenceRow",
    "binomial_envelope",
    "check_stirling",
    "convergence_csv",
    "convergence_report",
    "envelope_coefficient",
    "estimate_constant",
    "extended_norms",
    "increment_envelope",
    "random_symmetric_kernel",
    "refinement_table",
    "spacetime_window_norm",
    "stirling_surrogate",
]
