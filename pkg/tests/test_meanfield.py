from fractions import Fraction

import numpy as np
import pytest

from conftest import small_config
from graphonlab.graphon import DiscretizedGraphon, Graphon, constant
from graphonlab.meanfield import (
    averaged_law,
    conditional_law,
    interaction_measure,
    interaction_weights,
    simulate_reference,
)
from graphonlab.measures import measures_equal
from graphonlab.noise import generate_noise, uniform_labels
from graphonlab.sde import simulate_finite

ZERO = {"kind": "zero"}


def test_zero_coefficients_keep_clouds_at_initial_draws():
    cfg = small_config(coefficients={"drift": ZERO, "idio": ZERO, "common": ZERO})
    grid = simulate_reference(cfg, Graphon("product"), 4, M=3, seed=1)
    assert grid.states.shape == (4, 3, cfg.steps + 1, 1)
    assert np.array_equal(grid.states, np.repeat(grid.states[:, :, :1], cfg.steps + 1, axis=2))


def test_interaction_measure_examples():
    cfg = small_config()
    grid = simulate_reference(cfg, Graphon("product"), 2, M=3, seed=0)
    mu = interaction_measure(grid, Graphon("product"), 1, t=0.0)
    assert mu.mass == pytest.approx(0.75, abs=1e-15)
    np.testing.assert_allclose(mu.weights, np.repeat([0.5, 1.0], 3) * 0.5 / 3, rtol=1e-15)
    assert interaction_measure(grid, constant(0.0), Fraction(1, 2), t=0.0).mass == 0.0
    assert interaction_measure(grid, constant(1.0), 1, t=0.0).mass == pytest.approx(1.0, abs=1e-15)
    path = interaction_measure(grid, Graphon("product"), 1)
    assert path.atoms.shape == (6, cfg.steps + 1, 1)


def test_mass_bookkeeping():
    cfg = small_config()
    G = Graphon("exp", {"alpha": 2.0})
    grid = simulate_reference(cfg, G, 8, M=2, seed=0)
    v = np.arange(1, 9) / 8
    for u in uniform_labels(8):
        mass = interaction_measure(grid, G, u, t=cfg.T).mass
        assert mass == pytest.approx(G(float(u), v).sum() / 8, rel=1e-14)


def test_complete_graphon_gives_identical_interaction_measures():
    cfg = small_config()
    G = constant(1.0)
    grid = simulate_reference(cfg, G, 4, M=2, seed=3)
    ref = interaction_measure(grid, G, Fraction(1, 4), t=cfg.T)
    for u in uniform_labels(4)[1:]:
        other = interaction_measure(grid, G, u, t=cfg.T)
        assert np.array_equal(other.atoms, ref.atoms) and np.array_equal(other.weights, ref.weights)
    assert measures_equal(ref, averaged_law(grid, cfg.T))


def test_laws():
    cfg = small_config()
    grid = simulate_reference(cfg, Graphon("product"), 4, M=5, seed=2)
    law = conditional_law(grid, 0.5, t=cfg.T)
    assert law.mass == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_array_equal(law.atoms, grid.cloud(0.5)[:, -1])
    assert abs(averaged_law(grid, 0.0).mass - 1.0) <= 1e-12
    single = simulate_reference(cfg, Graphon("product"), 1, M=1, seed=2)
    dirac = conditional_law(single, 1, t=cfg.T)
    assert len(dirac) == 1
    assert measures_equal(averaged_law(single, cfg.T), dirac)
    with pytest.raises(KeyError):
        conditional_law(grid, Fraction(1, 3))
    with pytest.raises(KeyError):
        conditional_law(grid, 0.5, t=0.01)
    assert interaction_weights(grid, Graphon("product"), 1).shape == (20,)


def test_coupling_with_the_finite_system_is_bit_exact():
    cfg = small_config()
    n, n_ref = 4, 16
    grid = simulate_reference(cfg, Graphon("product"), n_ref, M=2, seed=7, replicate=3)
    noise = generate_noise(7, uniform_labels(n), cfg.steps, cfg.m, cfg.m_common,
                           dt=cfg.dt, d=cfg.d, replicate=3)
    assert np.array_equal(grid.common, noise.common)
    ref_noise = generate_noise(7, uniform_labels(n_ref), cfg.steps, 1, 1, dt=cfg.dt, d=1, replicate=3)
    for i, u in enumerate(noise.labels):
        k = uniform_labels(n_ref).index(u)
        assert np.array_equal(noise.idio[i], ref_noise.idio[k])
    # with no interaction the shared labels follow identical paths
    zero = constant(0.0)
    grid0 = simulate_reference(cfg, zero, n_ref, M=1, seed=7, replicate=3)
    fin = simulate_finite(cfg, DiscretizedGraphon(np.zeros((n, n))), noise)
    for i, u in enumerate(noise.labels):
        assert np.array_equal(fin.states[i], grid0.cloud(u)[0])


def test_zero_graphon_clouds_evolve_without_interaction():
    cfg = small_config()
    grid = simulate_reference(cfg, constant(0.0), 4, M=3, seed=1)
    # every coefficient integrates against the zero measure, so nothing moves
    assert interaction_measure(grid, constant(0.0), 1, t=cfg.T).mass == 0.0
    assert np.array_equal(grid.states[:, :, -1], grid.states[:, :, 0])


def test_common_noise_dominates_spread_across_paths():
    cfg = small_config(coefficients={
        "drift": {"kind": "linear", "kernel": "tanh", "scale": 1.0},
        "idio": ZERO,
        "common": {"kind": "constant", "value": 1.0},
    })
    within, means = [], []
    for r in range(32):
        grid = simulate_reference(cfg, constant(1.0), 2, M=32, seed=0, replicate=r)
        disp = grid.states[:, :, -1, 0] - grid.states[:, :, 0, 0]
        within.append(disp.var())
        means.append(disp.mean())
    assert np.var(means, ddof=1) > 10 * np.mean(within)
