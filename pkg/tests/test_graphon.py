import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphonlab.graphon import (
    DiscretizedGraphon,
    Graphon,
    GraphonError,
    constant,
    cut_norm,
    cut_norm_exact,
    cut_norm_heuristic,
    discretize,
    discretize_average,
    discretize_sample,
    inf_to_one_norm,
    matrix_to_csv,
    quadrature_residual,
    read_matrix_csv,
    refine,
    step_difference,
    validate_graphon_lipschitz,
)


def brute_cut(mat):
    n = mat.shape[0]
    best = 0.0
    subsets = [s for k in range(n + 1) for s in itertools.combinations(range(n), k)]
    for S in subsets:
        for T in subsets:
            best = max(best, abs(mat[np.ix_(S, T)].sum()) if S and T else 0.0)
    return best / (n * n)


def brute_inf_to_one(mat):
    n = mat.shape[0]
    return max(np.abs(mat @ np.array(g)).sum() for g in itertools.product((-1, 1), repeat=n)) / (n * n)


def random_symmetric(rng, n, signed=True):
    a = rng.uniform(-1 if signed else 0, 1, size=(n, n))
    return (a + a.T) / 2


def test_kinds_and_validation():
    u = np.array([0.25, 0.75])
    assert np.array_equal(Graphon("product")(u, u), [0.0625, 0.5625])
    assert np.array_equal(Graphon("min")(0.2, 0.7), 0.2)
    assert Graphon("exp", {"alpha": 2.0})(0.5, 0.5) == 1.0
    assert np.array_equal(constant(0.3)(u, u), [0.3, 0.3])
    with pytest.raises(GraphonError):
        Graphon("nope")
    with pytest.raises(GraphonError):
        Graphon("step", {"matrix": [[0.1, 0.2], [0.3, 0.4]]})
    with pytest.raises(GraphonError):
        Graphon("constant", {"c": 1.5})
    with pytest.raises(GraphonError):
        Graphon("step", {"matrix": [[0.1]], "boundaries": [0.0, 0.5]})
    with pytest.raises(GraphonError):
        Graphon.from_dict({"kind": "product", "alpha": 1})
    with pytest.raises(GraphonError):
        DiscretizedGraphon([[0.0, 1.0], [0.5, 0.0]])
    with pytest.raises(GraphonError):
        DiscretizedGraphon([[2.0]])


def test_step_blocks_are_right_closed():
    G = Graphon("step", {"matrix": [[0.8, 0.2], [0.2, 0.6]], "boundaries": [0.0, 0.5, 1.0]})
    assert G(0.0, 0.0) == 0.8
    assert G(0.5, 0.5) == 0.8
    assert G(0.5000001, 0.5000001) == 0.6
    assert G(1.0, 0.0) == 0.2
    back = Graphon.from_dict(G.to_dict())
    assert np.array_equal(back.params["matrix"], G.params["matrix"])


def test_discretize_average_examples():
    assert np.all(discretize_average(constant(0.4), 5).matrix == 0.4)
    D = discretize_average(Graphon("product"), 2)
    assert D.matrix[0, 0] == pytest.approx(0.0625, abs=1e-15)
    # the product kernel is bilinear, so Gauss-Legendre with 2 nodes is exact
    np.testing.assert_allclose(discretize_average(Graphon("product"), 2, 2).matrix,
                               [[0.0625, 0.1875], [0.1875, 0.5625]], atol=1e-15)
    block = np.array([[0.8, 0.2], [0.2, 0.6]])
    G = Graphon("step", {"matrix": block})
    np.testing.assert_allclose(discretize_average(G, 4).matrix, refine(block, 2), atol=1e-15)
    assert quadrature_residual(Graphon("product"), 8) < 1e-15
    # the exp kernel has a kink on the diagonal, so the residual is positive and shrinks with n
    res = [quadrature_residual(Graphon("exp", {"alpha": 3.0}), n) for n in (2, 4, 8)]
    assert 0 < res[2] < res[1] < res[0]


def test_discretize_sample_examples():
    assert np.all(discretize_sample(constant(0.7), 3).matrix == 0.7)
    assert np.array_equal(discretize_sample(Graphon("min"), 2).matrix, [[0.5, 0.5], [0.5, 1.0]])
    assert np.array_equal(discretize_sample(Graphon("product"), 2).matrix, [[0.25, 0.5], [0.5, 1.0]])
    assert discretize(Graphon("product"), 2, "sample").mode == "sample"
    with pytest.raises(ValueError):
        discretize(Graphon("product"), 2, "other")


def test_discretizations_converge_for_lipschitz_kinds():
    for G in (Graphon("product"), Graphon("min"), Graphon("exp", {"alpha": 2.0})):
        gaps = [cut_norm_exact(discretize_average(G, n).matrix - discretize_sample(G, n).matrix).value
                for n in (4, 8, 16)]
        assert gaps[0] > gaps[1] > gaps[2]
    assert np.array_equal(discretize_average(constant(0.3), 6).matrix, discretize_sample(constant(0.3), 6).matrix)


def test_refinement_gap_decreases_with_n():
    for G in (Graphon("product"), Graphon("min"), Graphon("exp", {"alpha": 2.0})):
        gaps = [cut_norm_exact(step_difference(discretize_average(G, n), discretize_average(G, 2 * n))).value
                for n in (2, 4, 8)]
        assert gaps[0] > gaps[1] > gaps[2]


def test_cut_norm_examples():
    assert cut_norm_exact(np.full((3, 3), 0.6)).value == pytest.approx(0.6, abs=1e-15)
    assert cut_norm_exact(np.full((4, 4), 0.25) - np.full((4, 4), 0.75)).value == 0.5
    r = cut_norm_exact(np.array([[0.5, -0.5], [-0.5, 0.5]]))
    assert r.value == 0.125
    assert r.exact
    assert cut_norm_exact(np.zeros((5, 5))).value == 0.0
    with pytest.raises(ValueError):
        cut_norm_exact(np.zeros((21, 21)))


@pytest.mark.parametrize("seed", range(25))
def test_cut_norm_exact_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    mat = random_symmetric(rng, int(rng.integers(1, 6)))
    r = cut_norm_exact(mat)
    assert r.value == pytest.approx(brute_cut(mat), rel=1e-12, abs=1e-15)
    # the reported sets achieve the value
    assert abs(mat[np.ix_(r.rows, r.cols)].sum()) / mat.shape[0] ** 2 == pytest.approx(r.value, rel=1e-12)


def test_heuristic_agrees_with_exact_on_most_instances():
    rng = np.random.default_rng(0)
    hits = 0
    for _ in range(200):
        mat = random_symmetric(rng, 8)
        exact = cut_norm_exact(mat).value
        heur = cut_norm_heuristic(mat, restarts=20).value
        assert heur <= exact + 1e-12
        hits += heur >= exact - 1e-12
    assert hits >= 190
    assert cut_norm_heuristic(np.full((30, 30), 0.4)).value == pytest.approx(0.4, abs=1e-15)
    assert cut_norm_heuristic(np.zeros((30, 30))).value == 0.0
    assert not cut_norm(np.zeros((30, 30))).exact


def test_cut_norm_triangle_inequality_on_step_graphons():
    rng = np.random.default_rng(6)
    for _ in range(30):
        a, b, c = (random_symmetric(rng, 6, signed=False) for _ in range(3))
        ab, bc, ac = (cut_norm_exact(x - y).value for x, y in ((a, b), (b, c), (a, c)))
        assert ac <= ab + bc + 1e-12
        assert cut_norm_exact(a - a).value == 0.0


def test_step_difference_on_common_grid():
    a = np.array([[1.0]])
    b = np.array([[0.5, 0.0], [0.0, 0.5]])
    d = step_difference(a, b)
    assert d.shape == (2, 2)
    assert cut_norm_exact(d).value == pytest.approx(cut_norm_exact(refine(d, 3)).value, rel=1e-12)


def test_inf_to_one_examples_and_oracle():
    assert inf_to_one_norm(np.zeros((4, 4))).value == 0.0
    assert inf_to_one_norm(np.full((4, 4), 0.3)).value == pytest.approx(0.3, abs=1e-15)
    rng = np.random.default_rng(1)
    for _ in range(30):
        mat = random_symmetric(rng, int(rng.integers(1, 7)))
        r = inf_to_one_norm(mat)
        assert r.value == pytest.approx(brute_inf_to_one(mat), rel=1e-12, abs=1e-15)
        c = cut_norm_exact(mat).value
        assert c <= r.value + 1e-12
        assert r.value <= 4 * c + 1e-12


def test_inf_to_one_heuristic_above_exact_range():
    rng = np.random.default_rng(2)
    mat = random_symmetric(rng, 24)
    r = inf_to_one_norm(mat, restarts=5)
    assert not r.exact
    g = np.array(r.signs)
    assert r.value == pytest.approx(np.abs(mat @ g).sum() / 24**2, rel=1e-12)


def test_lipschitz_reports():
    r = validate_graphon_lipschitz(constant(0.5))
    assert np.all(r.L_v == 0) and r.lipschitz
    r = validate_graphon_lipschitz(Graphon("product"))
    np.testing.assert_allclose(r.L_v, r.v_grid, atol=1e-12)
    assert r.integral_L == pytest.approx(0.5, abs=1e-12)
    assert r.integral_L2 == pytest.approx(1 / 3, abs=1e-4)
    r = validate_graphon_lipschitz(Graphon("min"))
    np.testing.assert_allclose(r.L_v[1:], 1.0, atol=1e-12)
    step = Graphon("step", {"matrix": [[0.8, 0.2], [0.2, 0.6]]})
    r = validate_graphon_lipschitz(step)
    assert not r.lipschitz and "jump" in r.note


def test_matrix_csv_round_trip(tmp_path):
    mat = discretize_average(Graphon("exp", {"alpha": 1.3}), 5).matrix
    path = tmp_path / "g.csv"
    path.write_text("# comment\n" + matrix_to_csv(mat))
    assert np.array_equal(read_matrix_csv(path), mat)


def test_discretized_graphon_is_immutable():
    D = discretize_sample(Graphon("product"), 3)
    with pytest.raises(ValueError):
        D.matrix[0, 0] = 0.0
    np.testing.assert_allclose(D.row_means(), D.matrix.mean(axis=1))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5), st.integers(0, 10_000))
def test_cut_norm_invariant_under_refinement(n, seed):
    mat = random_symmetric(np.random.default_rng(seed), n)
    assert cut_norm_exact(refine(mat, 2)).value == pytest.approx(cut_norm_exact(mat).value, rel=1e-12, abs=1e-15)
