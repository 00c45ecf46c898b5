"""Fine particle-cloud surrogate for the continuum graphon system.

Labels ``u = k / n_ref`` each carry ``M`` particles. All clouds are driven
by one common-noise path; the cloud at ``u`` is the empirical stand-in for
the conditional law of ``X_u`` given that path. Particle ``(u, k)`` sees the
atoms of every cloud ``v`` with weight ``G(u, v) / (n_ref M)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graphon import Graphon
from .measures import DiscreteMeasure, PathMeasure, grid_index
from .noise import as_label, generate_noise, uniform_labels
from .sde import canonical_order, simulate_particles


@dataclass(frozen=True, eq=False)
class ConditionalLawGrid:
    """Clouds of trajectories, shape ``(n_ref, M, T + 1, d)``, under one common path."""

    u_grid: tuple
    time_grid: np.ndarray
    states: np.ndarray
    common: np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def n_ref(self) -> int:
        return len(self.u_grid)

    @property
    def M(self) -> int:
        return self.states.shape[1]

    @property
    def weight(self) -> float:
        """Quadrature-times-cloud weight ``1 / (n_ref M)`` of a single atom."""
        return 1.0 / (self.n_ref * self.M)

    def label_values(self) -> np.ndarray:
        return np.array([float(u) for u in self.u_grid])

    def index(self, u) -> int:
        u = as_label(u)
        k = u * self.n_ref
        if k.denominator != 1 or not 1 <= k <= self.n_ref:
            raise KeyError(f"label {u} not in the reference grid")
        return int(k) - 1

    def cloud(self, u) -> np.ndarray:
        return self.states[self.index(u)]

    def time_index(self, t) -> int:
        return grid_index(self.time_grid, t)

    def flat_states(self) -> np.ndarray:
        n, M = self.states.shape[:2]
        return self.states.reshape(n * M, *self.states.shape[2:])


def simulate_reference(config, G: Graphon, n_ref: int, M: int = 1, seed: int = 0,
                       replicate: int = 0, noise=None) -> ConditionalLawGrid:
    """Evolve ``n_ref * M`` particles with graphon weights ``G(u, v) / (n_ref M)``.

    Particle ``(k/n_ref, 0)`` reads the same noise streams as the finite-system
    particle with the same label, so the two systems are pathwise coupled.
    """
    if n_ref < 1 or M < 1:
        raise ValueError("need n_ref >= 1 and M >= 1")
    labels = uniform_labels(n_ref)
    if noise is None:
        all_labels = [u for u in labels for _ in range(M)]
        members = np.tile(np.arange(M), n_ref)
        noise = generate_noise(seed, all_labels, config.steps, config.m, config.m_common,
                               dt=config.dt, d=config.d, members=members, replicate=replicate)
    u = np.arange(1, n_ref + 1) / n_ref
    Gu = G(u[:, None], u[None, :])
    w0 = 1.0 / (n_ref * M)
    W = np.kron(Gu, np.ones((M, M))) * w0
    ens = simulate_particles(config, W, noise, {"system": "reference", "n_ref": n_ref, "M": M})
    order = canonical_order(noise.labels, noise.members)
    states = ens.states[order].reshape(n_ref, M, *ens.states.shape[1:])
    prov = dict(ens.provenance)
    return ConditionalLawGrid(labels, ens.time_grid, states, noise.common.copy(), prov)


def _select(grid: ConditionalLawGrid, atoms: np.ndarray, weights, t):
    if t is None:
        return PathMeasure(grid.time_grid, atoms, weights)
    return DiscreteMeasure(atoms[:, grid.time_index(t)], weights)


def conditional_law(grid: ConditionalLawGrid, u, t=None):
    """Uniform empirical law of the cloud at ``u`` (path measure when ``t`` is None)."""
    return _select(grid, grid.cloud(u), np.full(grid.M, 1.0 / grid.M), t)


def interaction_weights(grid: ConditionalLawGrid, G: Graphon, u) -> np.ndarray:
    """Atom weights ``G(u, v) / (n_ref M)`` in flattened (label, member) order."""
    g = G(float(as_label(u)), grid.label_values())
    return np.repeat(np.asarray(g, dtype=np.float64) * grid.weight, grid.M)


def interaction_measure(grid: ConditionalLawGrid, G: Graphon, u, t=None):
    """Left-endpoint quadrature of ``int G(u, v) mu_v dv`` over the clouds."""
    return _select(grid, grid.flat_states(), interaction_weights(grid, G, u), t)


def averaged_law(grid: ConditionalLawGrid, t=None):
    """Uniform mixture of all clouds (mass 1)."""
    P = grid.n_ref * grid.M
    return _select(grid, grid.flat_states(), np.full(P, grid.weight), t)
