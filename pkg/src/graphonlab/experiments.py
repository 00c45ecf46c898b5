"""Monte Carlo estimators for the convergence quantities and the M_n rate.

Every replication redraws the common noise, the initial states and the
idiosyncratic noise: replication ``r`` uses the noise keys
``(seed, r, ...)``. Within a replication the finite systems for all ``n``
and the reference surrogate read the same streams, so they are pathwise
coupled. Each estimate also carries an ``nref_delta``: the paired change in
the estimate when the reference resolution doubles, computed on the first
``delta_reps`` replications.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import stats

from .graphon import Graphon, discretize, discretize_sample
from .measures import PathMeasure, graphon_weighted_empirical, uniform_empirical
from .meanfield import averaged_law, interaction_weights, simulate_reference
from .noise import generate_noise, uniform_labels
from .sde import simulate_finite
from .transport import w2_squared, wop2_squared

QUANTITIES = {
    "lln_finite": "E W2^2(empirical law of the n-particle system, averaged reference law)",
    "lln_graphon": "E W2^2(empirical law of X_{i/n}, averaged reference law)",
    "wlln_finite": "(1/n) sum_i E WOP2^2(weighted empirical of the n-particle system, interaction field)",
    "wlln_graphon": "(1/n) sum_i E WOP2^2(weighted empirical of X_{j/n}, interaction field)",
    "coupling_mean": "(1/n) sum_i E sup_t |X^n_i - X_{i/n}|^2",
    "coupling_sup": "sup_i E sup_t |X^n_i - X_{i/n}|^2",
    "spatial_w2sq": "E W2^2(mu_u1, mu_u2) on path space; n = 1/|u1 - u2|",
}


# -- rate formula and fits -----------------------------------------------------


class RateError(ValueError):
    """Excluded (d, eps) combination."""


@dataclass(frozen=True)
class RateParams:
    d: int
    eps: float

    def __post_init__(self):
        if self.d < 1:
            raise RateError("d must be >= 1")
        if self.eps <= 0:
            raise RateError("eps must be positive")
        if self.d <= 4 and math.isclose(self.eps, 2.0, rel_tol=0, abs_tol=1e-12):
            raise RateError("eps = 2 is excluded when d <= 4")
        if self.d > 4 and math.isclose(self.eps, (4 - self.d) / (self.d - 2), rel_tol=0, abs_tol=1e-12):
            raise RateError("eps = (4 - d)/(d - 2) is excluded when d > 4")


def rate_m_n(n, params: RateParams):
    """Three-branch rate: the dimension term plus ``n^(-eps/(2+eps))``."""
    n = np.asarray(n, dtype=np.float64)
    if np.any(n < 1):
        raise ValueError("n must be >= 1")
    d, eps = params.d, params.eps
    tail = n ** (-eps / (2.0 + eps))
    if d < 4:
        head = n ** -0.5
    elif d == 4:
        head = n ** -0.5 * np.log1p(n)
    else:
        head = n ** (-2.0 / d)
    out = head + tail
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    stderr: float
    intercept: float
    ci: tuple

    def brackets(self, lo: float, hi: float) -> bool:
        return lo <= self.slope <= hi


def fit_loglog_slope(ns, values, level: float = 0.95) -> SlopeFit:
    """OLS of ``log(value)`` on ``log(n)``; stderr from the residuals."""
    x = np.log(np.asarray(ns, dtype=np.float64))
    y = np.asarray(values, dtype=np.float64)
    if x.size != y.size or x.size < 3:
        raise ValueError("need at least three (n, value) pairs")
    if np.any(~(y > 0)):
        raise ValueError("estimates must be positive for a log-log fit")
    y = np.log(y)
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - intercept - slope * x
    dof = x.size - 2
    se = math.sqrt(float(resid @ resid) / dof / sxx)
    q = stats.t.ppf(0.5 + level / 2, dof)
    return SlopeFit(slope, se, intercept, (slope - q * se, slope + q * se))


# -- reports -------------------------------------------------------------------


@dataclass
class EstimateRow:
    quantity: str
    n: int
    mean: float
    stderr: float
    nref_delta: float
    values: np.ndarray = field(repr=False)


@dataclass
class ExperimentReport:
    """Per-n estimates with standard errors, fits and provenance."""

    experiment: str
    rows: list
    seed: int
    config_hash: str
    reps: int
    n_ref: int | None
    fits: dict = field(default_factory=dict)
    rate: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def quantities(self) -> list:
        seen = []
        for r in self.rows:
            if r.quantity not in seen:
                seen.append(r.quantity)
        return seen

    def select(self, quantity: str) -> list:
        return [r for r in self.rows if r.quantity == quantity]

    def means(self, quantity: str) -> np.ndarray:
        return np.array([r.mean for r in self.select(quantity)])

    def ns(self, quantity: str) -> list:
        return [r.n for r in self.select(quantity)]

    def table(self) -> list:
        return [(r.quantity, r.n, r.mean, r.stderr, r.nref_delta, self.seed) for r in self.rows]


def _summary(values) -> tuple:
    values = np.asarray(values, dtype=np.float64)
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
    return mean, se


def _paired_delta(base, doubled) -> float:
    k = len(doubled)
    if k == 0:
        return 0.0
    return abs(float(np.mean(np.asarray(base[:k]) - np.asarray(doubled))))


# -- replication runner --------------------------------------------------------


def default_threads() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def _run_tasks(fn, tasks, threads):
    """Apply ``fn`` to each task tuple; results come back in task order."""
    threads = max(1, int(threads or 1))
    if threads == 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(threads, len(tasks))) as pool:
        return list(pool.map(fn, *zip(*tasks)))


def _finite_noise(config, n, seed, rep):
    return generate_noise(seed, uniform_labels(n), config.steps, config.m, config.m_common,
                          dt=config.dt, d=config.d, replicate=rep)


def _check_labels(n_list, n_ref):
    for n in n_list:
        if n_ref % n:
            raise ValueError(f"n = {n} does not divide n_ref = {n_ref}; labels i/n would be missing")


def _ref_rows(grid, n):
    """Indices of the reference particles (member 0) at labels i/n."""
    step = grid.n_ref // n
    return np.arange(step - 1, grid.n_ref, step) * grid.M


# per-replication kernels (module level so worker processes can import them)


def _lln_rep(config, G, n_list, n_ref, mode, seed, rep):
    grid = simulate_reference(config, G, n_ref, 1, seed, rep)
    ref = averaged_law(grid)
    flat = grid.flat_states()
    out = {}
    for n in n_list:
        ens = simulate_finite(config, discretize(G, n, mode, config.quad_points), _finite_noise(config, n, seed, rep))
        out[("lln_finite", n)] = wop2_squared(ens.path_measure(), ref)
        mu = uniform_empirical(flat[_ref_rows(grid, n)], grid.time_grid)
        out[("lln_graphon", n)] = wop2_squared(mu, ref)
    return out


def _weighted_average(Gn, Gref, fn):
    """``(1/n) sum_i fn(i)`` evaluating each distinct (Gn row, Gref row) pair once."""
    n = Gn.shape[0]
    groups = {}
    for i in range(n):
        key = (Gn[i].tobytes(), Gref[i].tobytes())
        groups.setdefault(key, []).append(i)
    total = 0.0
    for idx in groups.values():
        total += (len(idx) / n) * fn(idx[0])
    return total


def _wlln_rep(config, G, n_list, n_ref, mode, seed, rep):
    grid = simulate_reference(config, G, n_ref, 1, seed, rep)
    flat = grid.flat_states()
    out = {}
    for n in n_list:
        Gn = discretize(G, n, mode, config.quad_points).matrix
        labels = uniform_labels(n)
        Gref = np.stack([interaction_weights(grid, G, u) for u in labels])
        ens = simulate_finite(config, discretize(G, n, mode, config.quad_points), _finite_noise(config, n, seed, rep))
        X_ref = flat[_ref_rows(grid, n)]

        def target(i):
            return PathMeasure(grid.time_grid, flat, Gref[i])

        out[("wlln_finite", n)] = _weighted_average(
            Gn, Gref, lambda i: wop2_squared(graphon_weighted_empirical(ens.states, Gn[i], grid.time_grid), target(i)))
        out[("wlln_graphon", n)] = _weighted_average(
            Gn, Gref, lambda i: wop2_squared(graphon_weighted_empirical(X_ref, Gn[i], grid.time_grid), target(i)))
    return out


def _coupling_rep(config, G, n_list, n_ref, mode, seed, rep):
    grid = simulate_reference(config, G, n_ref, 1, seed, rep)
    flat = grid.flat_states()
    out = {}
    for n in n_list:
        ens = simulate_finite(config, discretize_sample(G, n), _finite_noise(config, n, seed, rep))
        diff = ens.states - flat[_ref_rows(grid, n)]
        out[("coupling", n)] = np.max(np.sum(diff**2, axis=-1), axis=1)
    return out


def _spatial_rep(config, G, gaps, n_ref, M, seed, rep):
    grid = simulate_reference(config, G, n_ref, M, seed, rep)
    w = np.full(M, 1.0 / M)
    out = {}
    for gap in gaps:
        k = int(gap * n_ref)
        vals = []
        for a in range(n_ref - k):
            mu = PathMeasure(grid.time_grid, grid.states[a], w)
            nu = PathMeasure(grid.time_grid, grid.states[a + k], w)
            vals.append(w2_squared(mu, nu))
        out[("spatial_w2sq", gap)] = float(np.mean(vals))
    return out


# -- public estimators ---------------------------------------------------------


def _provenance(config, experiment, seed, extra):
    return config.config_hash({"experiment": experiment, **extra})


def _finish(report: ExperimentReport, fit_quantities):
    for q in fit_quantities:
        rows = report.select(q)
        means = [r.mean for r in rows]
        if len(rows) >= 3 and all(m > 0 for m in means):
            report.fits[q] = fit_loglog_slope([r.n for r in rows], means)
    return report


def _rate_guide(config, ns):
    try:
        params = RateParams(config.d, config.constants.eps)
    except RateError:
        return {}
    return {int(n): rate_m_n(int(n), params) for n in ns}


def _standard_rows(base, doubled, keys):
    rows = []
    for q, n in keys:
        vals = np.array([b[(q, n)] for b in base])
        mean, se = _summary(vals)
        delta = _paired_delta(vals, [d[(q, n)] for d in doubled])
        rows.append(EstimateRow(q, int(n), mean, se, delta, vals))
    return rows


def _defaults(reps, delta_reps):
    if reps < 2:
        raise ValueError("need at least two replications")
    return min(reps, 16) if delta_reps is None else min(delta_reps, reps)


def estimate_empirical_lln(config, G: Graphon, n_list, n_ref: int, reps: int, seed: int = 0,
                           threads: int = 1, mode: str | None = None,
                           delta_reps: int | None = None) -> ExperimentReport:
    """Path-space W2^2 between empirical laws and the averaged reference law."""
    mode = mode or config.discretization
    n_list = sorted(int(n) for n in n_list)
    _check_labels(n_list, n_ref)
    dr = _defaults(reps, delta_reps)
    tasks = [(config, G, n_list, n_ref, mode, seed, r) for r in range(reps)]
    tasks += [(config, G, n_list, 2 * n_ref, mode, seed, r) for r in range(dr)]
    res = _run_tasks(_lln_rep, tasks, threads)
    keys = [(q, n) for q in ("lln_finite", "lln_graphon") for n in n_list]
    rows = _standard_rows(res[:reps], res[reps:], keys)
    h = _provenance(config, "lln", seed, {"G": G.to_dict(), "n": n_list, "n_ref": n_ref,
                                          "reps": reps, "mode": mode, "delta_reps": dr})
    rep = ExperimentReport("lln", rows, seed, h, reps, n_ref, rate=_rate_guide(config, n_list),
                           meta={"mode": mode, "delta_reps": dr})
    return _finish(rep, ("lln_finite", "lln_graphon"))


def estimate_weighted_lln(config, G: Graphon, n_list, n_ref: int, reps: int, seed: int = 0,
                          threads: int = 1, mode: str | None = None,
                          delta_reps: int | None = None) -> ExperimentReport:
    """Label-averaged WOP2^2 between graphon-weighted empirical measures and the interaction field."""
    mode = mode or config.discretization
    n_list = sorted(int(n) for n in n_list)
    _check_labels(n_list, n_ref)
    dr = _defaults(reps, delta_reps)
    tasks = [(config, G, n_list, n_ref, mode, seed, r) for r in range(reps)]
    tasks += [(config, G, n_list, 2 * n_ref, mode, seed, r) for r in range(dr)]
    res = _run_tasks(_wlln_rep, tasks, threads)
    keys = [(q, n) for q in ("wlln_finite", "wlln_graphon") for n in n_list]
    rows = _standard_rows(res[:reps], res[reps:], keys)
    h = _provenance(config, "weighted-lln", seed, {"G": G.to_dict(), "n": n_list, "n_ref": n_ref,
                                                   "reps": reps, "mode": mode, "delta_reps": dr})
    rep = ExperimentReport("weighted-lln", rows, seed, h, reps, n_ref, rate=_rate_guide(config, n_list),
                           meta={"mode": mode, "delta_reps": dr})
    return _finish(rep, ("wlln_finite", "wlln_graphon"))


def estimate_coupling_error(config, G: Graphon, n_list, n_ref: int, reps: int, seed: int = 0,
                            threads: int = 1, delta_reps: int | None = None) -> ExperimentReport:
    """Pathwise error between the sampled-graphon n-system and the reference at labels i/n."""
    n_list = sorted(int(n) for n in n_list)
    _check_labels(n_list, n_ref)
    dr = _defaults(reps, delta_reps)
    tasks = [(config, G, n_list, n_ref, "sample", seed, r) for r in range(reps)]
    tasks += [(config, G, n_list, 2 * n_ref, "sample", seed, r) for r in range(dr)]
    res = _run_tasks(_coupling_rep, tasks, threads)
    base, doubled = res[:reps], res[reps:]
    rows = []
    for n in n_list:
        per = np.stack([b[("coupling", n)] for b in base])          # (reps, n)
        per_d = np.stack([d[("coupling", n)] for d in doubled]) if doubled else None
        vals = per.mean(axis=1)
        mean, se = _summary(vals)
        delta = _paired_delta(vals, per_d.mean(axis=1) if per_d is not None else [])
        rows.append(EstimateRow("coupling_mean", n, mean, se, delta, vals))
    for n in n_list:
        per = np.stack([b[("coupling", n)] for b in base])
        by_label = per.mean(axis=0)
        i = int(np.argmax(by_label))
        _, se = _summary(per[:, i])
        delta = 0.0
        if doubled:
            per_d = np.stack([d[("coupling", n)] for d in doubled])
            delta = abs(float(per[:dr].mean(axis=0).max() - per_d.mean(axis=0).max()))
        rows.append(EstimateRow("coupling_sup", n, float(by_label[i]), se, delta, per[:, i]))
    h = _provenance(config, "coupling", seed, {"G": G.to_dict(), "n": n_list, "n_ref": n_ref,
                                               "reps": reps, "delta_reps": dr})
    rep = ExperimentReport("coupling", rows, seed, h, reps, n_ref, rate=_rate_guide(config, n_list),
                           meta={"mode": "sample", "delta_reps": dr})
    return _finish(rep, ("coupling_mean", "coupling_sup"))


SPATIAL_GAPS = (Fraction(1, 16), Fraction(1, 8), Fraction(1, 4), Fraction(1, 2))


def estimate_spatial_continuity(config, G: Graphon, M: int, reps: int, n_ref: int = 16,
                                gaps=SPATIAL_GAPS, seed: int = 0, threads: int = 1,
                                delta_reps: int | None = None) -> ExperimentReport:
    """Mean W2^2 between cloud laws at labels ``gap`` apart (all such pairs on the grid).

    Rows are indexed by ``n = 1/gap``.
    """
    if M < 8:
        raise ValueError("the spatial experiment needs clouds of at least 8 particles")
    gaps = [Fraction(g) for g in gaps]
    for g in gaps:
        if (g * n_ref).denominator != 1 or not 0 < g < 1:
            raise ValueError(f"gap {g} is not a multiple of 1/n_ref inside (0, 1)")
    dr = _defaults(reps, delta_reps)
    tasks = [(config, G, gaps, n_ref, M, seed, r) for r in range(reps)]
    tasks += [(config, G, gaps, 2 * n_ref, M, seed, r) for r in range(dr)]
    res = _run_tasks(_spatial_rep, tasks, threads)
    rows = []
    for g in sorted(gaps, reverse=True):
        vals = np.array([b[("spatial_w2sq", g)] for b in res[:reps]])
        mean, se = _summary(vals)
        delta = _paired_delta(vals, [d[("spatial_w2sq", g)] for d in res[reps:]])
        rows.append(EstimateRow("spatial_w2sq", int(1 / g), mean, se, delta, vals))
    h = _provenance(config, "spatial", seed, {"G": G.to_dict(), "M": M, "n_ref": n_ref, "reps": reps,
                                              "gaps": [str(g) for g in gaps], "delta_reps": dr})
    return ExperimentReport("spatial", rows, seed, h, reps, n_ref, meta={"M": M, "delta_reps": dr})
