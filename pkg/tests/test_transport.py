import math

import numpy as np
import pytest
from scipy.optimize import linprog

from conftest import random_measure, random_path_measure
from graphonlab.measures import DiscreteMeasure, PathMeasure, normalize
from graphonlab.transport import (
    _mixed_form,
    TransportError,
    marginal_restriction_w2,
    w2_bruteforce,
    w2_exact,
    w2_squared,
    wop2,
    wop2_closed_form,
    wop2_path_upper_bound,
    wop2_squared,
)


def lp_w2_squared(mu, nu):
    """Independent oracle: transport LP solved by HiGHS."""
    X = mu.atoms.reshape(len(mu), -1, mu.dim)
    Y = nu.atoms.reshape(len(nu), -1, nu.dim)
    C = np.max(((X[:, None] - Y[None]) ** 2).sum(-1), axis=-1)
    n, m = C.shape
    A = []
    for i in range(n):
        row = np.zeros((n, m))
        row[i] = 1
        A.append(row.ravel())
    for j in range(m):
        col = np.zeros((n, m))
        col[:, j] = 1
        A.append(col.ravel())
    b = np.concatenate([mu.weights, nu.weights * (mu.mass / nu.mass)])
    res = linprog(C.ravel(), A_eq=np.array(A), b_eq=b, bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun


def test_w2_examples():
    mu = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    assert w2_exact(mu, mu)[0] == 0.0
    d, plan = w2_exact(mu, DiscreteMeasure([[2.0], [3.0]], [0.5, 0.5]))
    assert d == 2.0
    assert plan.flow == {(0, 0): 0.5, (1, 1): 0.5}
    assert w2_exact(DiscreteMeasure([[0.0]], [1.0]), DiscreteMeasure([[3.0]], [1.0]))[0] == 3.0


def test_bruteforce_examples():
    a = DiscreteMeasure([[0.0, 1.0]], [1.0])
    b = DiscreteMeasure([[3.0, 5.0]], [1.0])
    assert w2_bruteforce(a, b) == 5.0
    assert w2_bruteforce(a, a) == 0.0
    with pytest.raises(TransportError):
        w2_bruteforce(*(DiscreteMeasure(np.zeros((9, 1)), np.full(9, 1 / 9)),) * 2)


@pytest.mark.parametrize("seed", range(40))
def test_exact_matches_lp_oracle_general_weights(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 4))
    mu = random_measure(rng, d, max_atoms=7)
    nu = random_measure(rng, d, max_atoms=9)
    if mu.mass == 0 or nu.mass == 0:
        return
    nu = DiscreteMeasure(nu.atoms, nu.weights * (mu.mass / nu.mass))
    got = w2_squared(mu, nu)
    assert got == pytest.approx(lp_w2_squared(mu, nu), rel=1e-9, abs=1e-12)


def test_exact_matches_lp_oracle_paths():
    rng = np.random.default_rng(3)
    grid = np.linspace(0, 1, 4)
    for _ in range(10):
        mu = random_path_measure(rng, 2, grid, mass=1.0)
        nu = random_path_measure(rng, 2, grid, mass=1.0)
        assert w2_squared(mu, nu) == pytest.approx(lp_w2_squared(mu, nu), rel=1e-9, abs=1e-12)


def test_plan_feasible_and_cost_consistent():
    rng = np.random.default_rng(11)
    for _ in range(30):
        mu = random_measure(rng, 2, zero_prob=0.2)
        nu = random_measure(rng, 2, zero_prob=0.2)
        if mu.mass == 0 or nu.mass == 0:
            continue
        mu, nu = normalize(mu), normalize(nu)
        dist, plan = w2_exact(mu, nu)
        assert plan.marginal_residual() <= 1e-9
        cost = sum(f * np.sum((mu.atoms[i] - nu.atoms[j]) ** 2) for (i, j), f in plan.flow.items())
        assert cost == pytest.approx(dist**2, rel=1e-12, abs=1e-14)


def test_transport_errors():
    a = DiscreteMeasure([[0.0]], [1.0])
    with pytest.raises(TransportError):
        w2_exact(a, DiscreteMeasure([[0.0]], [2.0]))
    with pytest.raises(TransportError):
        w2_exact(a, DiscreteMeasure([[0.0, 0.0]], [1.0]))
    with pytest.raises(TransportError):
        w2_exact(DiscreteMeasure([[0.0]], [0.0]), DiscreteMeasure([[1.0]], [0.0]))
    p = PathMeasure([0.0, 1.0], [[[0.0], [0.0]]], [1.0])
    with pytest.raises(TransportError):
        wop2(a, p)
    with pytest.raises(TransportError):
        wop2(p, PathMeasure([0.0, 2.0], [[[0.0], [0.0]]], [1.0]))


def test_wop2_examples():
    x0 = np.array([0.7])
    r = wop2(DiscreteMeasure([x0], [2.5]), DiscreteMeasure([x0], [0.5]), x0)
    assert r.value == pytest.approx(2.0, abs=1e-15)
    r = wop2(DiscreteMeasure([[1.0]], [2.0]), DiscreteMeasure([[1.0]], [1.0]))
    assert (r.mass_gap, r.w2_term) == (1.0, 1.0)
    assert r.value == math.sqrt(2.0)
    assert wop2_closed_form(DiscreteMeasure([[1.0]], [2.0]), DiscreteMeasure([[1.0]], [1.0])) == math.sqrt(2.0)
    rng = np.random.default_rng(5)
    mu, nu = normalize(random_measure(rng, 2)), normalize(random_measure(rng, 2))
    assert wop2(mu, nu).value == pytest.approx(w2_exact(mu, nu)[0], rel=1e-12)
    assert wop2_closed_form(mu, nu) == pytest.approx(w2_exact(mu, nu)[0], rel=1e-9)
    assert wop2_closed_form(mu, mu) == 0.0


def test_wop2_result_invariant_and_zero_masses():
    rng = np.random.default_rng(8)
    for _ in range(50):
        mu = random_measure(rng, 2, zero_prob=0.3)
        nu = random_measure(rng, 2, zero_prob=0.3)
        r = wop2(mu, nu)
        assert r.value**2 == pytest.approx(r.mass_gap**2 + r.w2_term**2, rel=1e-9, abs=1e-15)
    zero = DiscreteMeasure([[4.0]], [0.0])
    mu = DiscreteMeasure([[1.0], [-1.0]], [0.5, 0.5])
    # the zero measure sits at x0 after scaling, so the W2 term is sqrt(M_0(mu) * m_mu)
    r = wop2(mu, zero)
    assert r.mass_gap == 1.0
    assert r.w2_term == pytest.approx(1.0, abs=1e-15)


def test_closed_form_rejects_paths():
    p = PathMeasure([0.0], [[[0.0]]], [1.0])
    with pytest.raises(TransportError):
        wop2_closed_form(p, p)


@pytest.mark.parametrize("x0", [None, [0.0, 0.0], [1.0, -2.0], [10.0, 3.0]])
def test_closed_form_identity_for_several_reference_points(x0):
    rng = np.random.default_rng(21)
    x0 = None if x0 is None else np.array(x0)
    for _ in range(60):
        mu = random_measure(rng, 2, zero_prob=0.2)
        nu = random_measure(rng, 2, zero_prob=0.2)
        a = wop2(mu, nu, x0).value
        b = wop2_closed_form(mu, nu, x0)
        assert b == pytest.approx(a, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("x0", [None, [2.0, -1.0]])
def test_metric_axioms_several_reference_points(x0):
    rng = np.random.default_rng(4)
    x0 = None if x0 is None else np.array(x0)
    for _ in range(60):
        a, b, c = (random_measure(rng, 2, max_atoms=6) for _ in range(3))
        ab, bc, ac = wop2(a, b, x0).value, wop2(b, c, x0).value, wop2(a, c, x0).value
        assert ab == wop2(b, a, x0).value
        assert wop2(a, a, x0).value == 0.0
        assert ac <= ab + bc + 1e-9


def test_path_upper_bound_and_equal_mass_identity():
    rng = np.random.default_rng(9)
    grid = np.linspace(0, 1, 5)
    for _ in range(30):
        mu = random_path_measure(rng, 1, grid)
        nu = random_path_measure(rng, 1, grid)
        assert wop2(mu, nu).value <= wop2_path_upper_bound(mu, nu) + 1e-12
        m = mu.mass
        nu_eq = PathMeasure(grid, nu.atoms, nu.weights * (m / nu.mass))
        target = m * w2_exact(normalize(mu), normalize(nu_eq))[0]
        assert wop2(mu, nu_eq).value == pytest.approx(target, abs=1e-10)
        assert wop2_path_upper_bound(mu, nu_eq) == pytest.approx(target, abs=1e-10)


def test_crossing_paths_need_the_running_infimum():
    # scaled paths (0, 4) and (1, 0): sup cost 16, mass gap 1, so wop2 = sqrt(17)
    grid = np.array([0.0, 1.0])
    mu = PathMeasure(grid, [[[0.0], [2.0]]], [2.0])
    nu = PathMeasure(grid, [[[1.0], [0.0]]], [1.0])
    assert wop2(mu, nu).value == pytest.approx(math.sqrt(17.0), rel=1e-15)
    # sup moments on both sides give 1 + 1 * (8 - 1) + 2 * 4 = 16, below the true value
    assert _mixed_form(mu, nu, None) == 4.0
    # running inf of |y|^2 is 0, so the bound is 1 + 8 + 8 = 17
    assert wop2_path_upper_bound(mu, nu) == pytest.approx(math.sqrt(17.0), rel=1e-15)


def test_path_bound_on_single_time_point_is_the_closed_form():
    rng = np.random.default_rng(14)
    for _ in range(20):
        mu = random_measure(rng, 2)
        nu = random_measure(rng, 2)
        pm = PathMeasure([0.0], mu.atoms[:, None, :], mu.weights)
        pn = PathMeasure([0.0], nu.atoms[:, None, :], nu.weights)
        assert wop2_path_upper_bound(pm, pn) == pytest.approx(wop2(mu, nu).value, rel=1e-9, abs=1e-12)


def test_marginal_restriction_bounded_by_path_w2():
    rng = np.random.default_rng(12)
    grid = np.linspace(0, 1, 4)
    single = np.array([0.0])
    for _ in range(20):
        mu = random_path_measure(rng, 2, grid, mass=1.0)
        nu = random_path_measure(rng, 2, grid, mass=1.0)
        full = w2_exact(mu, nu)[0]
        for t in grid:
            assert marginal_restriction_w2(mu, nu, t) <= full + 1e-10
        assert marginal_restriction_w2(mu, mu, grid[1]) == 0.0
    a = random_path_measure(rng, 1, single, mass=1.0)
    b = random_path_measure(rng, 1, single, mass=1.0)
    assert marginal_restriction_w2(a, b, 0.0) == pytest.approx(w2_exact(a, b)[0], rel=1e-12)
    with pytest.raises(KeyError):
        marginal_restriction_w2(a, b, 0.5)


def test_wop2_squared_matches_wop2():
    rng = np.random.default_rng(2)
    for _ in range(20):
        mu, nu = random_measure(rng, 3), random_measure(rng, 3)
        assert wop2_squared(mu, nu) == pytest.approx(wop2(mu, nu).value ** 2, rel=1e-12, abs=1e-15)
