"""Positive finite measures with finitely many atoms.

Two flavours share one interface:

* :class:`DiscreteMeasure` -- atoms are points of R^d, stored as ``(N, d)``.
* :class:`PathMeasure` -- atoms are trajectories sampled on a common time
  grid, stored as ``(N, T, d)``. The path norm is the maximum of the
  Euclidean norm over the grid.

Measures are immutable; all operations return new objects.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

MASS_ATOL = 1e-12
JSON_FORMAT = "graphonlab.measure"
JSON_VERSION = 1


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype, copy=True, order="C")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted atoms in R^d.

    Args:
        atoms: array of shape ``(N, d)``.
        weights: nonnegative array of shape ``(N,)``.
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = _frozen(self.atoms)
        weights = _frozen(self.weights)
        if atoms.ndim != 2:
            raise ValueError(f"atoms must have shape (N, d), got {atoms.shape}")
        if weights.shape != (atoms.shape[0],):
            raise ValueError("atoms and weights must have the same length")
        if atoms.shape[1] < 1:
            raise ValueError("dimension must be positive")
        if not np.all(np.isfinite(atoms)):
            raise ValueError("atoms must be finite")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise ValueError("weights must be finite and nonnegative")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def empty(cls, dim: int) -> "DiscreteMeasure":
        return cls(np.empty((0, dim)), np.empty(0))

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def __len__(self):
        return self.weights.shape[0]

    def _replace(self, atoms=None, weights=None):
        return DiscreteMeasure(
            self.atoms if atoms is None else atoms,
            self.weights if weights is None else weights,
        )

    def to_dict(self) -> dict:
        return {
            "format": JSON_FORMAT,
            "version": JSON_VERSION,
            "dim": self.dim,
            "atoms": self.atoms.tolist(),
            "weights": self.weights.tolist(),
        }


@dataclass(frozen=True, eq=False)
class PathMeasure:
    """Weighted trajectories on a shared, strictly increasing time grid.

    Args:
        time_grid: shape ``(T,)``.
        atoms: shape ``(N, T, d)``.
        weights: shape ``(N,)``.
        resampled: set when the atoms were linearly interpolated onto
            ``time_grid``; carried into reports.
    """

    time_grid: np.ndarray
    atoms: np.ndarray
    weights: np.ndarray
    resampled: bool = field(default=False)

    def __post_init__(self):
        grid = _frozen(self.time_grid)
        atoms = _frozen(self.atoms)
        weights = _frozen(self.weights)
        if grid.ndim != 1 or grid.size == 0:
            raise ValueError("time_grid must be a nonempty 1-d array")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("time_grid must be strictly increasing")
        if atoms.ndim != 3 or atoms.shape[1] != grid.size:
            raise ValueError(
                f"atoms must have shape (N, {grid.size}, d), got {atoms.shape}"
            )
        if atoms.shape[2] < 1:
            raise ValueError("dimension must be positive")
        if weights.shape != (atoms.shape[0],):
            raise ValueError("atoms and weights must have the same length")
        if not np.all(np.isfinite(atoms)):
            raise ValueError("atoms must be finite")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise ValueError("weights must be finite and nonnegative")
        object.__setattr__(self, "time_grid", grid)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def empty(cls, dim: int, time_grid) -> "PathMeasure":
        grid = np.asarray(time_grid, dtype=np.float64)
        return cls(grid, np.empty((0, grid.size, dim)), np.empty(0))

    @property
    def dim(self) -> int:
        return self.atoms.shape[2]

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def __len__(self):
        return self.weights.shape[0]

    def _replace(self, atoms=None, weights=None):
        return PathMeasure(
            self.time_grid,
            self.atoms if atoms is None else atoms,
            self.weights if weights is None else weights,
            self.resampled,
        )

    def to_dict(self) -> dict:
        return {
            "format": JSON_FORMAT,
            "version": JSON_VERSION,
            "dim": self.dim,
            "time_grid": self.time_grid.tolist(),
            "atoms": self.atoms.tolist(),
            "weights": self.weights.tolist(),
        }


Measure = DiscreteMeasure | PathMeasure


def is_path(mu) -> bool:
    return isinstance(mu, PathMeasure)


def reference_point(mu: Measure, x0=None) -> np.ndarray:
    """Broadcastable reference point (or path) for ``mu``; zero by default.

    For path measures a ``(d,)`` point is read as the constant path.
    """
    d = mu.dim
    if x0 is None:
        return np.zeros((len(mu.time_grid), d) if is_path(mu) else d)
    x0 = np.asarray(x0, dtype=np.float64)
    if is_path(mu):
        if x0.shape == (d,):
            return np.broadcast_to(x0, (len(mu.time_grid), d)).copy()
        if x0.shape == (len(mu.time_grid), d):
            return x0
        raise ValueError(
            f"reference path must have shape ({d},) or ({len(mu.time_grid)}, {d})"
        )
    if x0.shape != (d,):
        raise ValueError(f"reference point must have shape ({d},), got {x0.shape}")
    return x0


def total_mass(mu: Measure) -> float:
    return mu.mass


def normalize(mu: Measure) -> Measure:
    """``mu / m_mu`` when the mass is positive, otherwise the Dirac mass at zero."""
    m = mu.mass
    if m > 0:
        return mu._replace(weights=mu.weights / m)
    if is_path(mu):
        return PathMeasure(
            mu.time_grid, np.zeros((1, len(mu.time_grid), mu.dim)), [1.0], mu.resampled
        )
    return DiscreteMeasure(np.zeros((1, mu.dim)), [1.0])


def sq_dist_to(mu: Measure, x0=None) -> np.ndarray:
    """Squared distance of each atom to the reference (grid sup-norm for paths)."""
    diff = mu.atoms - reference_point(mu, x0)
    sq = (diff * diff).sum(axis=-1)
    if is_path(mu):
        sq = sq.max(axis=1, initial=0.0)
    return sq


def second_moment(mu: Measure, x0=None) -> float:
    """``sum_i w_i |a_i - x0|^2`` with the state or path norm."""
    return float(np.dot(mu.weights, sq_dist_to(mu, x0)))


def scale_pushforward(mu: Measure, a: float, x0=None) -> Measure:
    """Push ``mu`` forward by ``x -> a (x - x0) + x0`` (pointwise in time for paths)."""
    if a < 0:
        raise ValueError("scale factor must be nonnegative")
    ref = reference_point(mu, x0)
    return mu._replace(atoms=a * (mu.atoms - ref) + ref)


def graphon_weighted_empirical(atoms, g, time_grid=None) -> Measure:
    """``(1/n) sum_j g_j delta_{atoms_j}``; a path measure when ``time_grid`` is given."""
    atoms = np.asarray(atoms, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    n = atoms.shape[0]
    if g.shape != (n,):
        raise ValueError("need one graphon weight per atom")
    if np.any(g < 0) or np.any(g > 1) or not np.all(np.isfinite(g)):
        raise ValueError("graphon weights must lie in [0, 1]")
    weights = g / n if n else g
    if time_grid is not None:
        return PathMeasure(time_grid, atoms, weights)
    return DiscreteMeasure(atoms, weights)


def uniform_empirical(atoms, time_grid=None) -> Measure:
    atoms = np.asarray(atoms, dtype=np.float64)
    return graphon_weighted_empirical(atoms, np.ones(atoms.shape[0]), time_grid)


def restrict(mu: PathMeasure, t: float) -> DiscreteMeasure:
    """Time-``t`` marginal of a path measure; ``t`` must be a grid point."""
    k = grid_index(mu.time_grid, t)
    return DiscreteMeasure(mu.atoms[:, k, :], mu.weights)


def grid_index(grid, t: float) -> int:
    hits = np.flatnonzero(np.isclose(grid, t, rtol=0.0, atol=1e-12))
    if hits.size == 0:
        raise KeyError(f"time {t} is not on the grid")
    return int(hits[0])


def resample(mu: PathMeasure, new_grid) -> PathMeasure:
    """Linear interpolation of every atom onto ``new_grid`` (flags the result)."""
    new_grid = np.asarray(new_grid, dtype=np.float64)
    if new_grid[0] < mu.time_grid[0] - 1e-12 or new_grid[-1] > mu.time_grid[-1] + 1e-12:
        raise ValueError("cannot extrapolate beyond the original grid")
    N, _, d = mu.atoms.shape
    out = np.empty((N, new_grid.size, d))
    for i in range(N):
        for r in range(d):
            out[i, :, r] = np.interp(new_grid, mu.time_grid, mu.atoms[i, :, r])
    return PathMeasure(new_grid, out, mu.weights, resampled=True)


def support(mu: Measure) -> Measure:
    """Drop zero-weight atoms."""
    keep = mu.weights > 0
    if np.all(keep):
        return mu
    return mu._replace(atoms=mu.atoms[keep], weights=mu.weights[keep])


def _canonical(mu: Measure, decimals: int):
    mu = support(mu)
    flat = np.round(mu.atoms.reshape(len(mu), -1), decimals)
    if len(mu) == 0:
        return flat, mu.weights
    order = np.lexsort(flat.T[::-1])
    flat, w = flat[order], mu.weights[order]
    keep = np.ones(len(w), dtype=bool)
    keep[1:] = np.any(flat[1:] != flat[:-1], axis=1)
    groups = np.cumsum(keep) - 1
    merged = np.zeros(int(keep.sum()))
    np.add.at(merged, groups, w)
    return flat[keep], merged


def measures_equal(mu: Measure, nu: Measure, atol: float = MASS_ATOL, decimals: int = 12) -> bool:
    """Equality up to zero-weight atoms, atom order and duplicate atoms."""
    if type(mu) is not type(nu) or mu.dim != nu.dim:
        return False
    if is_path(mu) and not np.array_equal(mu.time_grid, nu.time_grid):
        return False
    a_atoms, a_w = _canonical(mu, decimals)
    b_atoms, b_w = _canonical(nu, decimals)
    if a_atoms.shape != b_atoms.shape:
        return False
    return bool(np.array_equal(a_atoms, b_atoms) and np.allclose(a_w, b_w, rtol=0, atol=atol))


def from_dict(doc: dict) -> Measure:
    if doc.get("format") != JSON_FORMAT:
        raise ValueError("not a measure document")
    if doc.get("version") != JSON_VERSION:
        raise ValueError(f"unsupported measure version {doc.get('version')}")
    dim = int(doc["dim"])
    weights = np.asarray(doc["weights"], dtype=np.float64)
    if "time_grid" in doc and doc["time_grid"] is not None:
        grid = np.asarray(doc["time_grid"], dtype=np.float64)
        atoms = np.asarray(doc["atoms"], dtype=np.float64).reshape(len(weights), grid.size, dim)
        return PathMeasure(grid, atoms, weights)
    atoms = np.asarray(doc["atoms"], dtype=np.float64).reshape(len(weights), dim)
    return DiscreteMeasure(atoms, weights)


def to_csv(mu: Measure) -> str:
    """One row per atom: ``weight`` then the coordinates."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if is_path(mu):
        header = ["weight"] + [
            f"t{k}_x{r}" for k in range(len(mu.time_grid)) for r in range(mu.dim)
        ]
    else:
        header = ["weight"] + [f"x{r}" for r in range(mu.dim)]
    writer.writerow(header)
    for w, a in zip(mu.weights, mu.atoms.reshape(len(mu), -1)):
        writer.writerow([repr(float(w))] + [repr(float(v)) for v in a])
    return buf.getvalue()
