"""Reproducible noise keyed by particle label.

Every random draw comes from a Philox (counter-based) stream whose key is
derived from ``(seed, replicate, purpose, label, member)``. A label ``u``
is stored as a reduced fraction, so the particle at ``u = 1/8`` in an
8-particle system and the one at ``u = 64/512`` in a 512-particle
reference read the very same stream. That is what couples the finite
system to the reference system pathwise.

Within a particle stream the first ``d`` normals are the standardized
initial draw; the Brownian increments follow, one row of ``m`` normals per
time step.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

COMMON = 0
PARTICLE = 1


def as_label(u) -> Fraction:
    if isinstance(u, Fraction):
        return u
    if isinstance(u, tuple):
        return Fraction(*u)
    return Fraction(u).limit_denominator(1 << 24)


def uniform_labels(n: int) -> tuple:
    """Labels ``1/n, 2/n, ..., n/n``."""
    return tuple(Fraction(i, n) for i in range(1, n + 1))


def stream(seed: int, replicate: int, purpose: int, label: Fraction = Fraction(0), member: int = 0):
    """Independent generator for one key."""
    ss = np.random.SeedSequence(
        entropy=int(seed),
        spawn_key=(int(replicate), purpose, label.numerator, label.denominator, int(member)),
    )
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *key: int) -> int:
    """A 63-bit integer seed derived from ``seed`` and an integer key."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


@dataclass(frozen=True, eq=False)
class NoiseBundle:
    """Initial draws and Brownian increments for a set of particles.

    Attributes:
        labels: label of each particle (reduced fractions).
        members: member index of each particle within its label's cloud.
        initial: standard normal draws, shape ``(P, d)``.
        idio: idiosyncratic increments, shape ``(P, steps, m)``.
        common: common-noise increments, shape ``(steps, m_common)``.
    """

    seed: int
    replicate: int
    dt: float
    labels: tuple
    members: np.ndarray
    initial: np.ndarray
    idio: np.ndarray
    common: np.ndarray

    @property
    def steps(self) -> int:
        return self.common.shape[0]

    def label_values(self) -> np.ndarray:
        return np.array([float(u) for u in self.labels])

    def coarsen(self) -> "NoiseBundle":
        """Pairwise sums of increments: the same Brownian path at step ``2 dt``."""
        if self.steps % 2:
            raise ValueError("need an even number of steps")
        P, steps, m = self.idio.shape
        idio = self.idio.reshape(P, steps // 2, 2, m).sum(axis=2)
        common = self.common.reshape(steps // 2, 2, -1).sum(axis=1)
        return NoiseBundle(self.seed, self.replicate, 2 * self.dt, self.labels,
                           self.members, self.initial, idio, common)


def generate_noise(seed: int, labels, steps: int, m: int, m_common: int, *,
                   dt: float, d: int, members=None, replicate: int = 0) -> NoiseBundle:
    """Draw the noise for ``labels`` (one particle per entry of ``labels``).

    ``members`` gives the cloud index of each particle (default all 0).
    """
    labels = tuple(as_label(u) for u in labels)
    P = len(labels)
    members = np.zeros(P, dtype=np.int64) if members is None else np.asarray(members, dtype=np.int64)
    if members.shape != (P,):
        raise ValueError("need one member index per label")
    keys = set(zip(labels, members.tolist()))
    if len(keys) != P:
        raise ValueError("particle keys (label, member) must be distinct")
    sd = np.sqrt(dt)
    initial = np.empty((P, d))
    idio = np.empty((P, steps, m))
    for p, (u, k) in enumerate(zip(labels, members.tolist())):
        z = stream(seed, replicate, PARTICLE, u, k).standard_normal(d + steps * m)
        initial[p] = z[:d]
        idio[p] = z[d:].reshape(steps, m) * sd
    common = stream(seed, replicate, COMMON).standard_normal((steps, m_common)) * sd
    return NoiseBundle(int(seed), int(replicate), float(dt), labels, members, initial, idio, common)
