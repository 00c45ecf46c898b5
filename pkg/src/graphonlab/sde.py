"""Euler-Maruyama integration of the finite particle system."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .coefficients import CoefficientFamily
from .graphon import DiscretizedGraphon
from .measures import PathMeasure, graphon_weighted_empirical
from .noise import NoiseBundle


class NumericalBlowUp(FloatingPointError):
    """A state became non-finite during integration."""


@dataclass(frozen=True, eq=False)
class TrajectoryEnsemble:
    """Trajectories on a time grid.

    Attributes:
        labels: label of each particle.
        members: cloud index of each particle (0 for the finite system).
        time_grid: shared grid, shape ``(T + 1,)``.
        states: shape ``(P, T + 1, d)``.
        provenance: config hash, seed and replicate.
    """

    labels: tuple
    members: np.ndarray
    time_grid: np.ndarray
    states: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.states.shape[:2] != (len(self.labels), len(self.time_grid)):
            raise ValueError("states do not match labels and time grid")
        if not np.all(np.isfinite(self.states)):
            raise NumericalBlowUp("ensemble holds non-finite states")

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.states.shape[2]

    def label_values(self) -> np.ndarray:
        return np.array([float(u) for u in self.labels])

    def index_of(self, labels, member: int = 0) -> np.ndarray:
        """Row indices of ``labels`` (with the given member index)."""
        lookup = {(u, k): p for p, (u, k) in enumerate(zip(self.labels, self.members.tolist()))}
        try:
            return np.array([lookup[(Fraction(u), member)] for u in labels], dtype=np.intp)
        except KeyError as exc:
            raise KeyError(f"label {exc.args[0][0]} not present in ensemble") from None

    def path_measure(self, g=None) -> PathMeasure:
        """``(1/n) sum_j g_j delta_{X_j}`` on path space (``g`` defaults to ones)."""
        g = np.ones(self.n) if g is None else g
        return graphon_weighted_empirical(self.states, g, self.time_grid)

    def to_dict(self) -> dict:
        return {
            "format": "graphonlab.ensemble",
            "version": 1,
            "labels": [[u.numerator, u.denominator] for u in self.labels],
            "members": self.members.tolist(),
            "time_grid": self.time_grid.tolist(),
            "states": self.states.tolist(),
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TrajectoryEnsemble":
        return cls(
            tuple(Fraction(a, b) for a, b in doc["labels"]),
            np.asarray(doc["members"], dtype=np.int64),
            np.asarray(doc["time_grid"], dtype=np.float64),
            np.asarray(doc["states"], dtype=np.float64),
            doc.get("provenance", {}),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _diffusion_term(k: np.ndarray, dZ: np.ndarray) -> np.ndarray:
    """``diag(k) E dZ`` with ``E`` the rectangular identity; dZ broadcasts over rows."""
    r = min(k.shape[1], dZ.shape[-1])
    out = np.zeros_like(k)
    out[:, :r] = k[:, :r] * dZ[..., :r]
    return out


def step_euler(X, W, dB, dW, family: CoefficientFamily, dt: float, Y=None, rowsum=None):
    """One explicit Euler-Maruyama step from a frozen snapshot.

    Args:
        X: current states, shape ``(P, d)``.
        W: interaction weights; particle ``i`` sees ``sum_j W[i, j] delta_{Y[j]}``.
        dB: idiosyncratic increments, shape ``(P, m)``.
        dW: common increment, shape ``(m_common,)``.
        family: drift and diffusion coefficients.
        dt: step size.
        Y: atoms of the interaction measures (defaults to ``X``).

    Returns:
        New states, shape ``(P, d)``.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = X if Y is None else np.ascontiguousarray(Y, dtype=np.float64)
    W = np.ascontiguousarray(W, dtype=np.float64)
    if rowsum is None:
        rowsum = W.sum(axis=1)
    cache = {}
    # overflow surfaces as a non-finite state below
    with np.errstate(over="ignore", invalid="ignore"):
        out = X + family.drift.batch(X, W, Y, rowsum, cache) * dt
        if not family.idio.is_zero:
            out += _diffusion_term(family.idio.batch(X, W, Y, rowsum, cache), np.asarray(dB))
        if not family.common.is_zero:
            out += _diffusion_term(family.common.batch(X, W, Y, rowsum, cache), np.asarray(dW)[None, :])
    if not np.all(np.isfinite(out)):
        bad = int(np.flatnonzero(~np.isfinite(out).all(axis=1))[0])
        raise NumericalBlowUp(f"non-finite state for particle {bad}")
    return out


def integrate(X0, W, idio, common, family: CoefficientFamily, dt: float) -> np.ndarray:
    """Run ``step_euler`` over all increments; returns ``(P, steps + 1, d)``."""
    P, d = X0.shape
    steps = common.shape[0]
    W = np.ascontiguousarray(W, dtype=np.float64)
    rowsum = W.sum(axis=1)
    out = np.empty((P, steps + 1, d))
    out[:, 0] = X0
    X = np.ascontiguousarray(X0, dtype=np.float64)
    for k in range(steps):
        try:
            X = step_euler(X, W, idio[:, k], common[k], family, dt, rowsum=rowsum)
        except NumericalBlowUp as exc:
            raise NumericalBlowUp(f"step {k + 1} (t={(k + 1) * dt:.6g}): {exc}") from None
        out[:, k + 1] = X
    return out


def canonical_order(labels, members) -> np.ndarray:
    """Permutation sorting particles by ``(label, member)``."""
    keys = list(zip(labels, np.asarray(members).tolist()))
    return np.array(sorted(range(len(keys)), key=keys.__getitem__), dtype=np.intp)


def _check_noise(config, noise: NoiseBundle):
    if noise.steps != config.steps:
        raise ValueError(f"noise has {noise.steps} steps, config needs {config.steps}")
    if abs(noise.dt - config.dt) > 1e-15:
        raise ValueError("noise step size differs from config dt")
    if noise.initial.shape[1] != config.d or noise.idio.shape[2] != config.m:
        raise ValueError("noise dimensions do not match config")
    if noise.common.shape[1] != config.m_common:
        raise ValueError("common noise dimension does not match config")


def simulate_particles(config, weights, noise: NoiseBundle, provenance=None) -> TrajectoryEnsemble:
    """Integrate particles with a fixed interaction-weight matrix.

    ``weights[i, j]`` is the weight particle ``i`` puts on particle ``j``, in
    the order of ``noise``. The arithmetic runs in canonical
    ``(label, member)`` order, so relabelling the inputs only permutes the
    output.
    """
    _check_noise(config, noise)
    weights = np.asarray(weights, dtype=np.float64)
    order = canonical_order(noise.labels, noise.members)
    u = noise.label_values()[order]
    X0 = config.initial_law.sample(noise.initial[order], u)
    W = weights[np.ix_(order, order)]
    states_sorted = integrate(X0, W, noise.idio[order], noise.common, config.family, config.dt)
    states = np.empty_like(states_sorted)
    states[order] = states_sorted
    prov = {"seed": noise.seed, "replicate": noise.replicate}
    prov.update(provenance or {})
    return TrajectoryEnsemble(noise.labels, noise.members.copy(), config.time_grid, states, prov)


def simulate_finite(config, Gn: DiscretizedGraphon, noise: NoiseBundle) -> TrajectoryEnsemble:
    """The n-particle system: particle ``i`` interacts through ``(1/n) Gn[i, :]``.

    Row/column ``k`` of ``Gn`` belongs to the ``k``-th particle of ``noise``.
    """
    n = Gn.n
    if len(noise.labels) != n:
        raise ValueError(f"noise carries {len(noise.labels)} particles, graphon has n={n}")
    if sorted(noise.labels) != [Fraction(i, n) for i in range(1, n + 1)]:
        raise ValueError("finite system labels must be {1/n, ..., n/n}")
    return simulate_particles(config, Gn.matrix / n, noise,
                              {"system": "finite", "n": n, "discretization": Gn.mode})


@dataclass(frozen=True)
class HalvingReport:
    dt: float
    strong_error: float
    max_error: float


def dt_halving_check(config, Gn: DiscretizedGraphon, noise: NoiseBundle) -> HalvingReport:
    """Strong-error estimate from rerunning on the same Brownian path at ``2 dt``.

    Returns the mean over particles of ``max_t |X_dt - X_2dt|^2`` on the coarse grid.
    """
    fine = simulate_finite(config, Gn, noise)
    coarse_cfg = replace(config, dt=2 * config.dt)
    coarse = simulate_finite(coarse_cfg, Gn, noise.coarsen())
    diff = fine.states[:, ::2] - coarse.states
    per = np.max(np.sum(diff**2, axis=-1), axis=1)
    return HalvingReport(config.dt, float(np.mean(per)), float(np.max(per)))
