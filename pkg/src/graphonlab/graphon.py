"""Graphons, their n x n discretizations, and the cut / infinity-to-one norms."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.integrate import trapezoid

from . import _kernels

PROBE = 64
SYM_TOL = 1e-12
EXACT_MAX_N = 20
DEFAULT_QUAD = 4

KINDS = ("constant", "product", "min", "exp", "step", "sampled")


class GraphonError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Graphon:
    """Symmetric kernel on [0, 1]^2 with values in [0, 1].

    Kinds and parameters:

    ``constant`` (``c``), ``product`` (u v), ``min`` (min(u, v)),
    ``exp`` (exp(-alpha |u - v|), ``alpha``), ``step`` (``matrix`` and
    increasing ``boundaries`` from 0 to 1), ``sampled`` (``matrix`` on the
    uniform grid).

    Step blocks are right-closed, so block ``k`` covers
    ``(b_k, b_{k+1}]`` and u = 0 belongs to the first block.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GraphonError(f"unknown graphon kind {self.kind!r}")
        p = dict(self.params)
        if self.kind == "constant":
            p = {"c": float(p.get("c", 1.0))}
        elif self.kind == "exp":
            p = {"alpha": float(p.get("alpha", 1.0))}
            if p["alpha"] < 0:
                raise GraphonError("alpha must be nonnegative")
        elif self.kind in ("step", "sampled"):
            mat = np.array(p["matrix"], dtype=np.float64)
            if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] == 0:
                raise GraphonError("step matrix must be square and nonempty")
            k = mat.shape[0]
            if self.kind == "sampled":
                bounds = np.linspace(0.0, 1.0, k + 1)
            else:
                bounds = np.array(p.get("boundaries", np.linspace(0.0, 1.0, k + 1)), dtype=np.float64)
                if bounds.shape != (k + 1,) or bounds[0] != 0.0 or bounds[-1] != 1.0 or np.any(np.diff(bounds) <= 0):
                    raise GraphonError("boundaries must increase from 0 to 1 with one more entry than blocks")
            mat.setflags(write=False)
            bounds.setflags(write=False)
            p = {"matrix": mat, "boundaries": bounds}
        else:
            p = {}
        object.__setattr__(self, "params", p)
        grid = np.linspace(0.0, 1.0, PROBE)
        vals = self(grid[:, None], grid[None, :])
        if not np.all(np.isfinite(vals)):
            raise GraphonError("graphon must be finite")
        if np.abs(vals - vals.T).max() > SYM_TOL:
            raise GraphonError("graphon is not symmetric")
        if vals.min() < -SYM_TOL or vals.max() > 1.0 + SYM_TOL:
            raise GraphonError("graphon values must lie in [0, 1]")

    def __call__(self, u, v):
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        kind = self.kind
        if kind == "constant":
            return np.full(np.broadcast(u, v).shape, self.params["c"])
        if kind == "product":
            return u * v
        if kind == "min":
            return np.minimum(u, v)
        if kind == "exp":
            return np.exp(-self.params["alpha"] * np.abs(u - v))
        mat, bounds = self.params["matrix"], self.params["boundaries"]
        k = mat.shape[0]
        bu = np.clip(np.searchsorted(bounds, u, side="left") - 1, 0, k - 1)
        bv = np.clip(np.searchsorted(bounds, v, side="left") - 1, 0, k - 1)
        return mat[bu, bv]

    @property
    def is_step(self) -> bool:
        return self.kind in ("step", "sampled")

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for key, val in self.params.items():
            out[key] = val.tolist() if isinstance(val, np.ndarray) else val
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "Graphon":
        doc = dict(doc)
        kind = doc.pop("kind")
        allowed = {
            "constant": {"c"},
            "product": set(),
            "min": set(),
            "exp": {"alpha"},
            "step": {"matrix", "boundaries"},
            "sampled": {"matrix"},
        }.get(kind)
        if allowed is None:
            raise GraphonError(f"unknown graphon kind {kind!r}")
        extra = set(doc) - allowed
        if extra:
            raise GraphonError(f"unknown graphon fields {sorted(extra)}")
        return cls(kind, doc)


def constant(c: float) -> Graphon:
    return Graphon("constant", {"c": c})


@dataclass(frozen=True, eq=False)
class DiscretizedGraphon:
    """n x n symmetric matrix with entries in [0, 1].

    ``mode`` records how the matrix was produced (``average``, ``sample`` or
    ``file``).
    """

    matrix: np.ndarray
    mode: str = "file"

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=np.float64, copy=True)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] == 0:
            raise GraphonError("discretized graphon must be a nonempty square matrix")
        if np.abs(mat - mat.T).max() > SYM_TOL:
            raise GraphonError("discretized graphon is not symmetric")
        if mat.min() < -SYM_TOL or mat.max() > 1.0 + SYM_TOL:
            raise GraphonError("entries must lie in [0, 1]")
        mat = np.clip(mat, 0.0, 1.0)
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def row_means(self) -> np.ndarray:
        return self.matrix.mean(axis=1)

    def as_graphon(self) -> Graphon:
        return Graphon("sampled", {"matrix": self.matrix})


def _mirror(a: np.ndarray) -> np.ndarray:
    return np.triu(a) + np.triu(a, 1).T


def discretize_average(G: Graphon, n: int, quad_points: int = DEFAULT_QUAD) -> DiscretizedGraphon:
    """Cell averages of ``G`` over ``[(i-1)/n, i/n] x [(j-1)/n, j/n]``.

    Tensor-product Gauss-Legendre with ``quad_points`` nodes per axis.
    """
    if n < 1 or quad_points < 1:
        raise ValueError("need n >= 1 and quad_points >= 1")
    if G.kind == "constant":
        return DiscretizedGraphon(np.full((n, n), G.params["c"]), "average")
    nodes, weights = np.polynomial.legendre.leggauss(quad_points)
    nodes = (nodes + 1.0) / 2.0
    weights = weights / 2.0
    pts = ((np.arange(n)[:, None] + nodes[None, :]) / n).ravel()
    out = np.empty((n, n))
    rows_per_chunk = max(1, 2_000_000 // (n * quad_points * quad_points))
    for start in range(0, n, rows_per_chunk):
        stop = min(n, start + rows_per_chunk)
        u = pts[start * quad_points: stop * quad_points]
        vals = G(u[:, None], pts[None, :]).reshape(stop - start, quad_points, n, quad_points)
        out[start:stop] = np.einsum("k,ikjl,l->ij", weights, vals, weights)
    return DiscretizedGraphon(_mirror(out), "average")


def quadrature_residual(G: Graphon, n: int, quad_points: int = DEFAULT_QUAD) -> float:
    """Max entry change when the number of quadrature nodes doubles."""
    a = discretize_average(G, n, quad_points).matrix
    b = discretize_average(G, n, 2 * quad_points).matrix
    return float(np.abs(a - b).max())


def discretize_sample(G: Graphon, n: int) -> DiscretizedGraphon:
    """Entry (i, j) = G(i/n, j/n) for i, j = 1..n."""
    if n < 1:
        raise ValueError("need n >= 1")
    u = np.arange(1, n + 1) / n
    return DiscretizedGraphon(_mirror(G(u[:, None], u[None, :])), "sample")


def discretize(G: Graphon, n: int, mode: str, quad_points: int = DEFAULT_QUAD) -> DiscretizedGraphon:
    if mode == "average":
        return discretize_average(G, n, quad_points)
    if mode == "sample":
        return discretize_sample(G, n)
    raise ValueError(f"unknown discretization mode {mode!r}")


def refine(matrix, factor: int) -> np.ndarray:
    """Same step function written on a grid ``factor`` times finer."""
    return np.kron(np.asarray(matrix, dtype=np.float64), np.ones((factor, factor)))


def step_difference(a, b) -> np.ndarray:
    """``a - b`` as step functions, written on the least common grid."""
    a = np.asarray(getattr(a, "matrix", a), dtype=np.float64)
    b = np.asarray(getattr(b, "matrix", b), dtype=np.float64)
    n = math.lcm(a.shape[0], b.shape[0])
    return refine(a, n // a.shape[0]) - refine(b, n // b.shape[0])


@dataclass(frozen=True)
class CutNormResult:
    value: float
    rows: tuple
    cols: tuple
    exact: bool


@dataclass(frozen=True)
class InfToOneResult:
    value: float
    signs: tuple
    exact: bool


def _as_matrix(D) -> np.ndarray:
    mat = np.ascontiguousarray(getattr(D, "matrix", D), dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("expected a square matrix")
    return mat


def _block_value(mat, rows, cols) -> float:
    """|sum_{S x T} D| / n^2, summed exactly in rationals."""
    n = mat.shape[0]
    if not rows or not cols:
        return 0.0
    total = sum(Fraction(float(x)) for x in mat[np.ix_(list(rows), list(cols))].ravel())
    return float(abs(total) / (n * n))


def _best_cols(mat, rows):
    colsum = mat[list(rows)].sum(axis=0) if rows else np.zeros(mat.shape[1])
    pos = tuple(np.flatnonzero(colsum > 0).tolist())
    neg = tuple(np.flatnonzero(colsum < 0).tolist())
    return pos if colsum[colsum > 0].sum() >= -colsum[colsum < 0].sum() else neg


def cut_norm_exact(D) -> CutNormResult:
    """Exact cut norm of a step function on the uniform n-grid (n <= 20)."""
    mat = _as_matrix(D)
    n = mat.shape[0]
    if n > EXACT_MAX_N:
        raise ValueError(f"exact cut norm limited to n <= {EXACT_MAX_N}; use the heuristic")
    _, mask = _kernels.cut_norm_enum(mat)
    rows = tuple(i for i in range(n) if (mask >> i) & 1)
    cols = _best_cols(mat, rows)
    return CutNormResult(_block_value(mat, rows, cols), rows, cols, True)


def cut_norm_heuristic(D, restarts: int = 20, seed: int = 0) -> CutNormResult:
    """Alternating maximization over row/column indicator vectors.

    Returns the best pair found, which is a lower bound on the cut norm.
    """
    mat = _as_matrix(D)
    n = mat.shape[0]
    rng = np.random.default_rng(seed)
    best = CutNormResult(0.0, (), (), False)
    for _ in range(max(1, restarts)):
        start = rng.random(n) < 0.5
        for sign in (1.0, -1.0):
            rows = start.copy()
            prev = -np.inf
            while True:
                cols = sign * mat[rows].sum(axis=0) > 0
                rows = sign * mat[:, cols].sum(axis=1) > 0
                val = sign * mat[np.ix_(rows, cols)].sum()
                if val <= prev + 1e-15:
                    break
                prev = val
            r = tuple(np.flatnonzero(rows).tolist())
            c = tuple(np.flatnonzero(sign * mat[rows].sum(axis=0) > 0).tolist())
            value = _block_value(mat, r, c)
            if value > best.value:
                best = CutNormResult(value, r, c, False)
    return best


def cut_norm(D, mode: str = "auto", restarts: int = 20, seed: int = 0) -> CutNormResult:
    n = _as_matrix(D).shape[0]
    if mode == "exact" or (mode == "auto" and n <= EXACT_MAX_N):
        return cut_norm_exact(D)
    if mode in ("heuristic", "auto"):
        return cut_norm_heuristic(D, restarts, seed)
    raise ValueError(f"unknown cut norm mode {mode!r}")


def _signs_value(mat, g) -> float:
    n = mat.shape[0]
    total = Fraction(0)
    for i in range(n):
        total += abs(sum(Fraction(float(x)) * int(s) for x, s in zip(mat[i], g)))
    return float(total / (n * n))


def inf_to_one_norm(D, restarts: int = 20, seed: int = 0) -> InfToOneResult:
    """``max_{g in {-1, 1}^n} (1/n^2) sum_i |sum_j D_ij g_j|``.

    Exhaustive for n <= 20, alternating sign iteration above.
    """
    mat = _as_matrix(D)
    n = mat.shape[0]
    if n <= EXACT_MAX_N:
        _, mask = _kernels.inf_to_one_enum(mat)
        g = tuple(-1 if (mask >> j) & 1 else 1 for j in range(n))
        return InfToOneResult(_signs_value(mat, g), g, True)
    rng = np.random.default_rng(seed)
    best_val, best_g = -1.0, None
    for _ in range(max(1, restarts)):
        g = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        prev = -np.inf
        while True:
            s = np.where(mat @ g >= 0, 1.0, -1.0)
            g = np.where(mat.T @ s >= 0, 1.0, -1.0)
            val = np.abs(mat @ g).sum()
            if val <= prev + 1e-15:
                break
            prev = val
        if val > best_val:
            best_val, best_g = val, g
    g = tuple(int(x) for x in best_g)
    return InfToOneResult(_signs_value(mat, g), g, False)


@dataclass(frozen=True)
class LipschitzReport:
    v_grid: np.ndarray
    L_v: np.ndarray
    integral_L: float
    integral_L2: float
    lipschitz: bool
    note: str = ""


def validate_graphon_lipschitz(G: Graphon, resolution: int = 256) -> LipschitzReport:
    """Finite-difference estimate of ``L_v = sup_u |dG(u, v)/du|`` per probe ``v``.

    Step kinds with jumps are flagged as non-Lipschitz; the numbers are still
    returned (they grow with ``resolution``).
    """
    u = np.linspace(0.0, 1.0, resolution + 1)
    vals = G(u[:, None], u[None, :])
    slopes = np.abs(np.diff(vals, axis=0)) * resolution
    L_v = slopes.max(axis=0)
    integral_L = float(trapezoid(L_v, u))
    integral_L2 = float(trapezoid(L_v**2, u))
    ok, note = True, ""
    if G.is_step:
        mat = G.params["matrix"]
        if np.ptp(mat) > 0:
            ok, note = False, "step graphon has jumps; not Lipschitz in u"
    return LipschitzReport(u, L_v, integral_L, integral_L2, ok, note)


def read_matrix_csv(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", comments="#", dtype=np.float64))


def matrix_to_csv(matrix) -> str:
    rows = [",".join(repr(float(x)) for x in row) for row in np.asarray(matrix)]
    return "\n".join(rows) + "\n"
