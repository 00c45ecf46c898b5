"""Exact 2-Wasserstein distance and the WOP2 metric on positive measures.

Couplings are solved exactly: uniform measures with the same number of atoms
go through the assignment kernel, everything else through POT's network
simplex (``ot.emd``). No entropic smoothing anywhere.
"""
from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass

import numpy as np

# POT probes every array backend on import; only numpy is needed here.
for _key in ("TENSORFLOW", "PYTORCH", "JAX", "CUPY"):
    os.environ.setdefault(f"POT_BACKEND_DISABLE_{_key}", "1")

import ot  # noqa: E402

from . import _kernels  # noqa: E402
from .measures import (  # noqa: E402
    DiscreteMeasure,
    PathMeasure,
    is_path,
    normalize,
    restrict,
    scale_pushforward,
    second_moment,
    support,
)

MASS_TOL = 1e-9
BRUTEFORCE_MAX = 8
_EMD_MAX_ITER = 10_000_000


class TransportError(ValueError):
    """Raised for incompatible inputs to a transport problem."""


@dataclass(frozen=True)
class TransportPlan:
    """Sparse optimal coupling between two measures.

    ``flow`` maps atom index pairs (in the original, unfiltered indexing) to
    transported mass; ``cost`` is ``sum flow * ground cost`` with the squared
    Euclidean (or squared grid sup-norm) cost.
    """

    row_masses: np.ndarray
    col_masses: np.ndarray
    flow: dict
    cost: float

    def marginal_residual(self) -> float:
        rows = np.zeros_like(self.row_masses)
        cols = np.zeros_like(self.col_masses)
        for (i, j), f in self.flow.items():
            rows[i] += f
            cols[j] += f
        return float(
            max(
                np.abs(rows - self.row_masses).max(initial=0.0),
                np.abs(cols - self.col_masses).max(initial=0.0),
            )
        )

    def transposed(self) -> "TransportPlan":
        return TransportPlan(self.col_masses, self.row_masses,
                             {(j, i): f for (i, j), f in self.flow.items()}, self.cost)


@dataclass(frozen=True)
class Wop2Result:
    value: float
    mass_gap: float
    w2_term: float
    plan: TransportPlan


def check_compatible(mu, nu) -> None:
    if type(mu) is not type(nu):
        raise TransportError("cannot compare a path measure with a state measure")
    if mu.dim != nu.dim:
        raise TransportError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    if is_path(mu) and not np.array_equal(mu.time_grid, nu.time_grid):
        raise TransportError("path measures must share a time grid")


def _as_paths(atoms: np.ndarray) -> np.ndarray:
    if atoms.ndim == 2:
        return np.ascontiguousarray(atoms[:, None, :])
    return np.ascontiguousarray(atoms)


def cost_matrix(mu, nu) -> np.ndarray:
    """Squared ground distances between all atom pairs."""
    check_compatible(mu, nu)
    return _kernels.sup_sq_cost(_as_paths(mu.atoms), _as_paths(nu.atoms))


def _solve(mu, nu):
    """Optimal coupling on the supports. Returns (cost, rows, cols, flows)."""
    check_compatible(mu, nu)
    ma, mb = mu.mass, nu.mass
    if abs(ma - mb) > MASS_TOL:
        raise TransportError(f"mass mismatch: {ma!r} vs {mb!r}")
    keep_a = np.flatnonzero(mu.weights > 0)
    keep_b = np.flatnonzero(nu.weights > 0)
    if keep_a.size == 0 or keep_b.size == 0:
        raise TransportError("empty support; normalize zero-mass measures first")
    a = mu.weights[keep_a]
    b = nu.weights[keep_b]
    C = _kernels.sup_sq_cost(_as_paths(mu.atoms[keep_a]), _as_paths(nu.atoms[keep_b]))
    n, m = C.shape
    if n == m and np.all(a == a[0]) and np.all(b == b[0]):
        cols = _kernels.assignment(C)
        rows = np.arange(n)
        flows = a.copy()
        cost = float(np.dot(a, C[rows, cols]))
        return cost, keep_a[rows], keep_b[cols], flows
    if mb != ma:
        b = b * (ma / mb)
    G, log = ot.emd(a, b, C, numItermax=_EMD_MAX_ITER, log=True)
    if log.get("result_code", 1) != 1:
        raise RuntimeError(f"network simplex did not converge: {log.get('warning')}")
    r, c = np.nonzero(G)
    flows = G[r, c]
    cost = float(np.dot(flows, C[r, c]))
    return cost, keep_a[r], keep_b[c], flows


def w2_squared(mu, nu) -> float:
    """Squared W2 between equal-mass measures (no plan bookkeeping)."""
    return max(_solve(mu, nu)[0], 0.0)


def w2_exact(mu, nu):
    """Exact W2 distance and optimal plan between measures of equal mass."""
    cost, rows, cols, flows = _solve(mu, nu)
    flow = {}
    for i, j, f in zip(rows.tolist(), cols.tolist(), flows.tolist()):
        flow[(i, j)] = flow.get((i, j), 0.0) + f
    plan = TransportPlan(mu.weights.copy(), nu.weights.copy(), flow, cost)
    return math.sqrt(max(cost, 0.0)), plan


def w2_bruteforce(mu, nu) -> float:
    """W2 by enumerating every permutation; uniform, equal-size inputs only."""
    check_compatible(mu, nu)
    n = len(mu)
    if len(nu) != n:
        raise TransportError("brute force needs equal cardinalities")
    if n > BRUTEFORCE_MAX:
        raise TransportError(f"brute force limited to n <= {BRUTEFORCE_MAX}")
    if n == 0:
        raise TransportError("empty measures")
    w = mu.weights[0]
    if np.any(mu.weights != w) or np.any(nu.weights != w):
        raise TransportError("brute force needs identical uniform weights")
    X = mu.atoms.reshape(n, -1, mu.dim)
    Y = nu.atoms.reshape(n, -1, nu.dim)
    sq = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            sq[i, j] = np.max(np.sum((X[i] - Y[j]) ** 2, axis=-1))
    best = min(
        sum(sq[i, p[i]] for i in range(n)) for p in itertools.permutations(range(n))
    )
    return math.sqrt(w * best)


def _scaled_normalized(mu, x0):
    return scale_pushforward(normalize(mu), mu.mass, x0)


def _measure_key(mu) -> tuple:
    return (mu.mass, len(mu), mu.atoms.tobytes(), mu.weights.tobytes())


def _ordered(mu, nu):
    """Put the pair in a fixed order so the distance is bit-for-bit symmetric."""
    if _measure_key(nu) < _measure_key(mu):
        return nu, mu
    return mu, nu


def wop2_parts(mu, nu, x0=None) -> tuple[float, float]:
    """Return ``(m_mu - m_nu, W2^2(T_{m_mu} # mu_bar, T_{m_nu} # nu_bar))``."""
    check_compatible(mu, nu)
    gap = mu.mass - nu.mass
    a, b = _ordered(mu, nu)
    w2sq = w2_squared(_scaled_normalized(a, x0), _scaled_normalized(b, x0))
    return gap, w2sq


def wop2_squared(mu, nu, x0=None) -> float:
    gap, w2sq = wop2_parts(mu, nu, x0)
    return gap * gap + w2sq


def wop2(mu, nu, x0=None) -> Wop2Result:
    """WOP2 distance between positive measures on R^d or on path space."""
    check_compatible(mu, nu)
    gap = mu.mass - nu.mass
    a, b = _ordered(mu, nu)
    w2, plan = w2_exact(_scaled_normalized(a, x0), _scaled_normalized(b, x0))
    if a is not mu:
        plan = plan.transposed()
    return Wop2Result(math.sqrt(gap * gap + w2 * w2), gap, w2, plan)


def _mixed_form(mu, nu, x0) -> float:
    ma, mb = mu.mass, nu.mass
    gap = ma - mb
    moments = second_moment(mu, x0) - second_moment(nu, x0)
    cross = 0.0
    if ma > 0 and mb > 0:
        cross = ma * mb * w2_squared(*_ordered(normalize(mu), normalize(nu)))
    return math.sqrt(max(gap * gap + gap * moments + cross, 0.0))


def wop2_closed_form(mu: DiscreteMeasure, nu: DiscreteMeasure, x0=None) -> float:
    """Mass/moment expansion of WOP2; an identity on R^d only."""
    check_compatible(mu, nu)
    if is_path(mu):
        raise TransportError(
            "the closed form is only an upper bound on path space; "
            "use wop2_path_upper_bound"
        )
    return _mixed_form(mu, nu, x0)


def _inf_moment(mu, x0) -> float:
    """Integral of min_t |x(t) - x0|^2, the time-infimum analogue of the second moment."""
    X = mu.atoms if is_path(mu) else mu.atoms[:, None, :]
    x0 = np.zeros(mu.dim) if x0 is None else np.asarray(x0, dtype=float)
    return float(mu.weights @ np.min(((X - x0) ** 2).sum(-1), axis=1)) if len(mu) else 0.0


def wop2_path_upper_bound(mu: PathMeasure, nu: PathMeasure, x0=None) -> float:
    """Mass/moment expansion evaluated with the path norm; bounds WOP2 from above.

    Pointwise in time, |a x - b y|^2 = a(a-b)|x|^2 + b(b-a)|y|^2 + ab|x-y|^2.
    The heavier measure's term has a nonnegative coefficient and is bounded by
    its running sup; the lighter one's coefficient is nonpositive, so it is
    bounded by the running inf. With equal masses this is m^2 W2^2, and on a
    single time point it coincides with the closed form.
    """
    check_compatible(mu, nu)
    ma, mb = mu.mass, nu.mass
    gap = ma - mb
    if gap >= 0:
        moments = second_moment(mu, x0) - _inf_moment(nu, x0)
    else:
        moments = _inf_moment(mu, x0) - second_moment(nu, x0)
    cross = 0.0
    if ma > 0 and mb > 0:
        cross = ma * mb * w2_squared(*_ordered(normalize(mu), normalize(nu)))
    return math.sqrt(max(gap * gap + gap * moments + cross, 0.0))


def marginal_restriction_w2(mu: PathMeasure, nu: PathMeasure, t: float) -> float:
    """W2 between the time-``t`` marginals of two equal-mass path measures."""
    check_compatible(mu, nu)
    return math.sqrt(w2_squared(restrict(mu, t), restrict(nu, t)))


def wp_power(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float) -> float:
    """``W_p^p`` between probability measures on R^d (internal: initial-law checks)."""
    check_compatible(mu, nu)
    mu, nu = support(normalize(mu)), support(normalize(nu))
    C = np.sqrt(_kernels.sup_sq_cost(_as_paths(mu.atoms), _as_paths(nu.atoms))) ** p
    G = ot.emd(mu.weights, nu.weights, C, numItermax=_EMD_MAX_ITER)
    return float(np.sum(G * C))
