import math

import numpy as np
import pytest

from gphier.errors import ConfigError
from gphier.estimates import estimate_constant, random_symmetric_kernel
from gphier.grid import make_grid
from gphier.hierarchy import Hierarchy
from gphier.kernel import DenseKernel, ModelSpec, free_propagate, h_alpha_norm, hermitian_defect, tensor_from_wavefunction
from gphier.collision import CollisionSpec, collide
from gphier.nls import factorized_hierarchy, split_step
from gphier.picard import (
    ClosureSpec,
    direct_solve,
    direct_step,
    duhamel_term,
    picard_iterate,
    picard_solve,
    picard_xi,
    relative_level_errors,
    theorem_horizon,
    verify_solution,
)
from gphier.trajectory import TimeGrid

G8 = make_grid(1, 8)
X8 = G8.coords[0]
CUBIC = ModelSpec(1, "cubic")


def smooth_phi(x):
    return 0.4 * (1 + 0.5 * np.exp(1j * x)) + 0.3 * np.exp(-2j * x)


def oracle(phi, model, T, M, grid=G8, refine=64):
    return ClosureSpec.oracle(split_step(phi, model, T, M * refine, grid))


def stack_norm(stack, k, grid=G8, alpha=1.0):
    return np.array([h_alpha_norm(DenseKernel._wrap(k, grid, s), alpha) for s in stack])


def random_hierarchy(rng, K, model=CUBIC, grid=G8):
    return Hierarchy([random_symmetric_kernel(grid, k, model.alpha, rng) for k in range(1, K + 1)], model, grid)


@pytest.mark.parametrize("model", [ModelSpec(1, "cubic"), ModelSpec(-1, "cubic"), ModelSpec(1, "quintic")])
def test_constant_state_is_stationary(model):
    # constant phi0: every collision image vanishes, the free flow is trivial
    phi = np.full(8, 0.5 + 0.2j)
    K = 3
    h = Hierarchy.factorized(phi, K, model, G8)
    tg = TimeGrid(1.0, 8)
    traj = picard_iterate(h, model, tg, oracle(phi, model, 1.0, 8, refine=2), 4)
    for k in range(1, K + 1):
        assert np.max(np.abs(traj.levels[k] - h.level(k).values)) <= 1e-12


def test_first_iterate_zero_closure_is_free_flow(rng):
    h = random_hierarchy(rng, 1)
    tg = TimeGrid(0.7, 5)
    traj = picard_iterate(h, CUBIC, tg, ClosureSpec.zero(), 1)
    for i, t in enumerate(tg.nodes):
        ref = free_propagate(h.level(1), t).values
        assert np.max(np.abs(traj.levels[1][i] - ref)) <= 1e-12


def test_depth_zero_is_constant(rng):
    h = random_hierarchy(rng, 2)
    traj = picard_iterate(h, CUBIC, TimeGrid(1.0, 3), ClosureSpec.zero(), 0)
    assert np.array_equal(traj.levels[2][3], h.level(2).values)


def test_iterates_stay_hermitian():
    phi = smooth_phi(X8)
    h = Hierarchy.factorized(phi, 3, CUBIC, G8)
    tg = TimeGrid(0.5, 8)
    traj = picard_iterate(h, CUBIC, tg, oracle(phi, CUBIC, 0.5, 8, refine=4), 3)
    for k in (1, 2, 3):
        for i in range(len(tg)):
            assert hermitian_defect(traj.kernel(k, i)) <= 1e-10


@pytest.mark.parametrize("model", [CUBIC, ModelSpec(1, "quintic")])
@pytest.mark.parametrize("kind", ["zero", "oracle"])
@pytest.mark.parametrize("m", [0, 1, 2, 3, 4])
def test_duhamel_sum_identity(model, kind, m):
    phi = smooth_phi(X8)
    K = 3
    h = Hierarchy.factorized(phi, K, model, G8)
    tg = TimeGrid(0.4, 6)
    closure = ClosureSpec.zero() if kind == "zero" else oracle(phi, model, 0.4, 6, refine=2)
    traj = picard_iterate(h, model, tg, closure, m)
    for k in range(1, K + 1):
        total = sum(duhamel_term(h, k, j, tg, model, closure, depth=m) for j in range(m + 1))
        scale = np.max(np.abs(traj.levels[k]))
        assert np.max(np.abs(total - traj.levels[k])) <= 1e-10 * scale


def test_duhamel_term_zero_preserves_norm(rng):
    h = random_hierarchy(rng, 2)
    tg = TimeGrid(1.3, 4)
    for k in (1, 2):
        stack = duhamel_term(h, k, 0, tg, CUBIC)
        norms = stack_norm(stack, k)
        assert np.allclose(norms, h_alpha_norm(h.level(k), 1.0), rtol=1e-12)


def test_duhamel_term_single_node():
    phi = smooth_phi(X8)
    h = Hierarchy.factorized(phi, 2, CUBIC, G8)
    tg = TimeGrid(0.5, 4)
    g = duhamel_term(h, 1, 1, tg, CUBIC, node=2)
    assert isinstance(g, DenseKernel)
    assert np.allclose(g.values, duhamel_term(h, 1, 1, tg, CUBIC)[2])


def test_duhamel_term_constant_data_vanishes():
    h = Hierarchy.factorized(np.full(8, 0.6), 3, CUBIC, G8)
    stack = duhamel_term(h, 1, 1, TimeGrid(1.0, 4), CUBIC)
    assert np.max(np.abs(stack)) <= 1e-14


def test_duhamel_term_rejects_bad_level():
    h = Hierarchy.factorized(np.full(8, 0.6), 2, CUBIC, G8)
    with pytest.raises(ConfigError):
        duhamel_term(h, 3, 1, TimeGrid(1.0, 2), CUBIC)
    with pytest.raises(ConfigError):
        duhamel_term(h, 1, -1, TimeGrid(1.0, 2), CUBIC)


@pytest.fixture(scope="module")
def chat_n4():
    return estimate_constant(CUBIC, make_grid(1, 4), samples=20, seed=0).Chat


def test_binomial_bound(chat_n4):
    # ||Xi_j^(k)(t)|| <= binom(k+j-1, j) (C t)^j ||gamma0^(k+j)||; level 6 is
    # out of memory reach at N=4, so k=2 stops at j=3
    g = make_grid(1, 4)
    phi = 0.4 * (1 + 0.5 * np.exp(1j * g.coords[0]))
    h = Hierarchy.factorized(phi, 5, CUBIC, g)
    a = h.norms()
    tg = TimeGrid(0.5, 4)
    for k in (1, 2):
        for j in range(0, 6 - k):
            norms = stack_norm(duhamel_term(h, k, j, tg, CUBIC), k, grid=g)
            bound = math.comb(k + j - 1, j) * (chat_n4 * tg.nodes) ** j * a[k + j - 1]
            assert np.all(norms <= bound * (1 + 1e-12) + 1e-15), (k, j)


def test_xi_first_iterate(rng):
    h = random_hierarchy(rng, 2)
    tg = TimeGrid(0.6, 3)
    rho = picard_xi(h, CUBIC, tg, ClosureSpec.zero(), 1)
    spec = CollisionSpec.from_model(CUBIC)
    for i, t in enumerate(tg.nodes):
        ref = collide(free_propagate(h.level(2), t), spec).values
        assert np.max(np.abs(rho.levels[1][i] - ref)) <= 1e-12
    assert np.max(np.abs(rho.levels[2])) == 0.0


def test_xi_constant_state_vanishes():
    phi = np.full(8, 0.3 - 0.1j)
    h = Hierarchy.factorized(phi, 3, CUBIC, G8)
    tg = TimeGrid(1.0, 4)
    rho = picard_xi(h, CUBIC, tg, oracle(phi, CUBIC, 1.0, 4, refine=2), 3)
    for k in (1, 2, 3):
        assert np.max(np.abs(rho.levels[k])) <= 1e-13


def test_xi_consistency_with_gamma():
    # gamma_m = free + Duhamel(rho_m) once rho uses the same closure and depth
    phi = smooth_phi(X8)
    h = Hierarchy.factorized(phi, 3, CUBIC, G8)
    tg = TimeGrid(0.4, 8)
    cl = oracle(phi, CUBIC, 0.4, 8, refine=2)
    m = 3
    gamma = picard_iterate(h, CUBIC, tg, cl, m)
    rho = picard_xi(h, CUBIC, tg, cl, m)
    for k in (1, 2, 3):
        rebuilt = duhamel_term(h, k, 0, tg, CUBIC) + _duhamel_of(rho.levels[k], k, tg)
        assert np.max(np.abs(rebuilt - gamma.levels[k])) <= 1e-12


def _duhamel_of(src, k, tg):
    from gphier.picard import _duhamel_coeffs, _ifft_stack

    return _ifft_stack(_duhamel_coeffs(src, G8, k, tg.dt))


def test_direct_step_constant_state_exact():
    phi = np.full(8, 0.4 + 0.3j)
    h = Hierarchy.factorized(phi, 2, CUBIC, G8)
    cl = oracle(phi, CUBIC, 0.5, 5, refine=1)
    state = {k: h.level(k) for k in (1, 2)}
    out = direct_step(state, 0.0, CUBIC, cl, 0.1)
    for k in (1, 2):
        assert np.max(np.abs(out[k] - h.level(k).values)) <= 1e-14


def test_direct_step_rejects_bad_input():
    h = Hierarchy.factorized(np.ones(8), 1, CUBIC, G8)
    with pytest.raises(ConfigError):
        direct_step({1: h.level(1)}, 0.0, CUBIC, ClosureSpec.zero(), 0.0)
    with pytest.raises(ConfigError):
        direct_step({1: h.level(1).values}, 0.0, CUBIC, ClosureSpec.zero(), 0.1)


def test_direct_matches_picard():
    phi = smooth_phi(X8)
    T = 0.05
    h = Hierarchy.factorized(phi, 2, CUBIC, G8)
    wave = split_step(phi, CUBIC, T, 4096, G8)
    cl = ClosureSpec.oracle(wave)
    pic = picard_iterate(h, CUBIC, TimeGrid(T, 256), cl, 12)
    dir_ = direct_solve(h, CUBIC, TimeGrid(T, 64), cl)
    for k in (1, 2):
        diff = dir_.levels[k][-1] - pic.levels[k][-1]
        assert h_alpha_norm(DenseKernel._wrap(k, G8, diff), 1.0) <= 1e-5


def test_direct_second_order():
    phi = smooth_phi(X8)
    T = 0.5
    h = Hierarchy.factorized(phi, 2, CUBIC, G8)
    wave = split_step(phi, CUBIC, T, 8192, G8)
    cl = ClosureSpec.oracle(wave)
    errs = []
    for M in (16, 32, 64):
        traj = direct_solve(h, CUBIC, TimeGrid(T, M), cl)
        ref = factorized_hierarchy(wave, 2, tg=TimeGrid(T, M))
        errs.append(np.max(relative_level_errors(traj, ref)))
    assert errs[0] / errs[1] >= 3.5
    assert errs[1] / errs[2] >= 3.5


def test_verify_factorized_residual_second_order():
    phi = smooth_phi(X8)
    T = 0.5
    h = Hierarchy.factorized(phi, 2, CUBIC, G8)
    wave = split_step(phi, CUBIC, T, 8192, G8)
    cl = ClosureSpec.oracle(wave)
    res = []
    for M in (16, 32, 64):
        tg = TimeGrid(T, M)
        res.append(verify_solution(factorized_hierarchy(wave, 2, tg=tg), h, CUBIC, cl).max_residual)
    assert res[0] / res[1] >= 3.5
    assert res[1] / res[2] >= 3.5


def test_verify_free_trajectory_zero_residual():
    # plane-wave data: the collision image of gamma0^(2) vanishes identically
    phi = 0.7 * np.exp(1j * X8)
    h = Hierarchy.factorized(phi, 1, CUBIC, G8)
    tg = TimeGrid(1.0, 8)
    traj = picard_iterate(h, CUBIC, tg, ClosureSpec.zero(), 1)
    report = verify_solution(traj, h, CUBIC, ClosureSpec.zero())
    assert report.max_residual <= 1e-10


def test_verify_flags_corrupted_node():
    phi = smooth_phi(X8)
    T = 0.5
    h = Hierarchy.factorized(phi, 2, CUBIC, G8)
    wave = split_step(phi, CUBIC, T, 4096, G8)
    tg = TimeGrid(T, 64)
    traj = factorized_hierarchy(wave, 2, tg=tg)
    traj.levels[1][37] *= 1.01
    report = verify_solution(traj, h, CUBIC, ClosureSpec.oracle(wave))
    row = report.levels[0]
    assert row["max_residual"] >= 1e-3
    assert row["worst_node"] == 37
    d = report.as_dict()
    assert d["dt_squared"] == pytest.approx(tg.dt**2)


def test_linearity_zero_closure(rng):
    ha = random_hierarchy(rng, 3)
    hb = random_hierarchy(rng, 3)
    tg = TimeGrid(0.5, 4)
    cl = ClosureSpec.zero()
    ta = picard_iterate(ha, CUBIC, tg, cl, 3)
    tb = picard_iterate(hb, CUBIC, tg, cl, 3)
    tab = picard_iterate(ha - hb, CUBIC, tg, cl, 3)
    for k in (1, 2, 3):
        diff = tab.levels[k] - (ta.levels[k] - tb.levels[k])
        assert np.max(np.abs(diff)) <= 1e-10 * np.max(np.abs(ta.levels[k]))


def test_factorization_propagates():
    # the rank-1 defect is trapezoid error, O(dt^2); T=0.1, M=512 puts it
    # below 1e-8 on both levels
    phi = smooth_phi(X8)
    T, M = 0.1, 512
    h = Hierarchy.factorized(phi, 2, CUBIC, G8)
    result = picard_solve(h, CUBIC, TimeGrid(T, M), oracle(phi, CUBIC, T, M, refine=8), tol=1e-12)
    assert result.converged
    traj = result.trajectory
    for i in range(0, M + 1, 64):
        w, v = np.linalg.eigh(traj.levels[1][i])
        psi = np.sqrt(w[-1]) * v[:, -1]
        for k in (1, 2):
            ref = tensor_from_wavefunction(psi, k, G8)
            err = h_alpha_norm(traj.kernel(k, i) - ref, 1.0) / h_alpha_norm(ref, 1.0)
            assert err <= 1e-8, (i, k, err)


def test_picard_solve_depth_and_flag():
    phi = smooth_phi(X8)
    h = Hierarchy.factorized(phi, 2, CUBIC, G8)
    tg = TimeGrid(0.5, 8)
    cl = oracle(phi, CUBIC, 0.5, 8, refine=2)
    res = picard_solve(h, CUBIC, tg, cl, max_depth=1, tol=0.0)
    assert res.depth == 1 and not res.converged and len(res.increments) == 1
    res = picard_solve(h, CUBIC, tg, cl)
    assert res.converged and res.depth <= 32
    assert res.increments[-1] < 1e-8


def test_theorem_horizon():
    assert theorem_horizon(0.25, 1.0) == pytest.approx(1.0)
    assert theorem_horizon(0.5, 2.0, "quintic") == pytest.approx(1 / 8)
    assert theorem_horizon(0.3, 0.0) == math.inf
    with pytest.raises(ConfigError):
        theorem_horizon(0.0, 1.0)


def test_closure_mismatch_rejected():
    phi = smooth_phi(X8)
    h = Hierarchy.factorized(phi, 2, CUBIC, G8)
    wrong = oracle(0.5 * phi, CUBIC, 0.5, 4, refine=1)
    with pytest.raises(ConfigError):
        picard_iterate(h, CUBIC, TimeGrid(0.5, 4), wrong, 1)


def test_closure_needs_wave():
    with pytest.raises(ConfigError):
        ClosureSpec("oracle")
    with pytest.raises(ConfigError):
        ClosureSpec("mean-field")


def test_depth_must_be_nonnegative():
    h = Hierarchy.factorized(np.ones(8), 1, CUBIC, G8)
    with pytest.raises(ConfigError):
        picard_iterate(h, CUBIC, TimeGrid(1.0, 2), ClosureSpec.zero(), -1)
