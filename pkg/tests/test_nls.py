import numpy as np
import pytest

from gphier.errors import BlowUpError, ConfigError, ShapeMismatchError
from gphier.grid import make_grid
from gphier.hierarchy import quasi_norm
from gphier.kernel import ModelSpec, hermitian_defect, permutation_defect
from gphier.nls import factorized_hierarchy, split_step
from gphier.trajectory import TimeGrid

G = make_grid(1, 16)
X = G.coords[0]


def plane_wave_exact(c, mu, sigma, t):
    # closed form: c e^{ix} exp(-i (1 + mu |c|^(2 sigma)) t)
    return c * np.exp(1j * X) * np.exp(-1j * (1 + mu * abs(c) ** (2 * sigma)) * t)


def test_constant_state_exact():
    c = 0.3 + 0.4j
    for mu in (1, -1):
        traj = split_step(np.full(16, c), ModelSpec(mu, "cubic"), 1.0, 7, G)
        for t, phi in zip(traj.tg.nodes, traj.states):
            assert np.max(np.abs(phi - c * np.exp(-1j * mu * abs(c) ** 2 * t))) <= 1e-14


@pytest.mark.parametrize("interaction,sigma", [("cubic", 1), ("quintic", 2)])
@pytest.mark.parametrize("mu", [1, -1])
def test_plane_wave(interaction, sigma, mu):
    c = 0.7
    traj = split_step(c * np.exp(1j * X), ModelSpec(mu, interaction), 1.0, 256, G)
    assert np.max(np.abs(traj.states[-1] - plane_wave_exact(c, mu, sigma, 1.0))) <= 1e-6


@pytest.mark.parametrize("interaction,sigma", [("cubic", 1), ("quintic", 2)])
def test_plane_wave_is_exact_under_splitting(interaction, sigma):
    # |phi| is constant on a plane wave, so the two sub-flows commute
    for M in (4, 8, 16):
        traj = split_step(0.7 * np.exp(1j * X), ModelSpec(1, interaction), 1.0, M, G)
        assert np.max(np.abs(traj.states[-1] - plane_wave_exact(0.7, 1, sigma, 1.0))) <= 1e-12


@pytest.mark.parametrize("interaction", ["cubic", "quintic"])
def test_second_order(interaction):
    phi0 = 0.4 * (1 + 0.5 * np.exp(1j * X)) + 0.3 * np.exp(-2j * X)
    model = ModelSpec(1, interaction)
    ref = split_step(phi0, model, 1.0, 8192, G).states[-1]
    errs = [np.max(np.abs(split_step(phi0, model, 1.0, M, G).states[-1] - ref)) for M in (32, 64, 128)]
    assert errs[0] / errs[1] >= 3.5
    assert errs[1] / errs[2] >= 3.5


def test_mass_conservation():
    phi0 = 0.4 * (1 + 0.5 * np.exp(1j * X)) + 0.3 * np.exp(-2j * X)
    traj = split_step(phi0, ModelSpec(-1, "cubic"), 2.0, 4096, G)
    mass = traj.mass()
    assert np.max(np.abs(mass - mass[0])) <= 1e-8 * mass[0]


def test_focusing_defocusing_conjugate_phase():
    c = 0.6 + 0.2j
    base = c * np.exp(1j * X)
    ratios = []
    for mu in (1, -1):
        end = split_step(base, ModelSpec(mu, "cubic"), 0.8, 64, G).states[-1]
        ratios.append(end / (base * np.exp(-1j * 0.8)))
    assert np.max(np.abs(ratios[0] - np.conj(ratios[1]))) <= 1e-13


def test_dealias_option_preserves_band_limited_data():
    phi0 = 0.4 * (1 + 0.5 * np.exp(1j * X))
    a = split_step(phi0, ModelSpec(), 0.1, 64, G, dealias=True)
    b = split_step(phi0, ModelSpec(), 0.1, 64, G)
    assert np.max(np.abs(a.states[-1] - b.states[-1])) <= 1e-6


def test_errors():
    with pytest.raises(ConfigError):
        split_step(np.ones(16), ModelSpec(), 1.0, 0, G)
    with pytest.raises(ConfigError):
        split_step(np.ones(16), ModelSpec(), -1.0, 4, G)
    with pytest.raises(ShapeMismatchError):
        split_step(np.ones(8), ModelSpec(), 1.0, 4, G)
    with pytest.raises(BlowUpError):
        split_step(np.full(16, 2e6), ModelSpec(-1), 1.0, 4, G)


def test_zero_horizon():
    traj = split_step(np.ones(16), ModelSpec(), 0.0, 3, G)
    assert np.all(traj.states == 1.0)


def test_factorized_hierarchy_constant_and_symmetric():
    traj = split_step(np.full(16, 0.5 + 0.0j), ModelSpec(), 1.0, 8, G)
    th = factorized_hierarchy(traj, 2)
    for k in (1, 2):
        stack = th.levels[k]
        assert np.max(np.abs(stack - stack[0])) <= 1e-14
    phi0 = 0.4 * (1 + 0.5 * np.exp(1j * X))
    traj = split_step(phi0, ModelSpec(), 0.5, 8, G)
    th = factorized_hierarchy(traj, 2)
    for i in range(len(th.tg)):
        g2 = th.kernel(2, i)
        assert hermitian_defect(g2) <= 1e-14 and permutation_defect(g2) <= 1e-14
    q = G.h_alpha_norm(phi0, 1.0) ** 2
    sep = factorized_hierarchy(traj, 32, "separable")
    assert abs(quasi_norm(sep.norm_table()[:, 0]).value - q) <= 1e-10 + q * 2.0**-32


def test_subsampling():
    traj = split_step(np.ones(16), ModelSpec(), 1.0, 64, G)
    assert traj.at_nodes(TimeGrid(1.0, 16)).shape == (17, 16)
    assert np.array_equal(traj.at(0.5), traj.states[32])
    with pytest.raises(ConfigError):
        traj.at_nodes(TimeGrid(1.0, 48))
    with pytest.raises(ConfigError):
        traj.at(0.51)
    with pytest.raises(ConfigError):
        factorized_hierarchy(traj, 1, "tucker")
