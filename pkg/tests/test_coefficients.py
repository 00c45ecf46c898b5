import numpy as np
import pytest

from conftest import random_measure
from graphonlab.coefficients import (
    Coefficient,
    CoefficientFamily,
    builtin_linear_family,
    linear_bound_constant,
)
from graphonlab.measures import DiscreteMeasure
from graphonlab.transport import wop2


def test_linear_tanh_example():
    phi = Coefficient("linear", kernel="tanh", scale=1.0)
    x = np.array([0.3])
    assert phi.evaluate(x, DiscreteMeasure([x + 1.0], [1.0]))[0] == pytest.approx(np.tanh(1.0), rel=1e-15)
    assert phi.evaluate(x, DiscreteMeasure([x + 1.0], [1.0]))[0] == pytest.approx(0.7616, abs=1e-4)


def test_constant_kernel_scales_with_mass():
    phi = Coefficient("linear", kernel="tanh", offset=0.4)
    mu = DiscreteMeasure([[1.0, 2.0], [-3.0, 0.5]], [0.25, 0.5])
    np.testing.assert_allclose(phi.evaluate([0.0, 0.0], mu), [0.3, 0.3], rtol=1e-15)
    zero = DiscreteMeasure([[1.0, 2.0]], [0.0])
    full = Coefficient("linear", kernel="tanh", offset=0.4, scale=0.7)
    assert np.all(full.evaluate([5.0, 1.0], zero) == 0.0)


def test_kinds():
    mu = DiscreteMeasure([[2.0], [4.0]], [0.5, 0.5])
    assert Coefficient("zero").evaluate([1.0], mu)[0] == 0.0
    assert Coefficient("constant", value=0.3).evaluate([1.0], mu)[0] == 0.3
    diff = Coefficient("linear", kernel="difference", scale=-1.0)
    assert diff.evaluate([1.0], mu)[0] == -2.0
    mr = Coefficient("mean_reverting", scale=0.5, rate=2.0)
    assert mr.evaluate([1.0], mu)[0] == 0.5 * np.tanh(4.0)


def test_batch_matches_pointwise_and_cache_is_shared():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(6, 2))
    Y = rng.normal(size=(9, 2))
    W = rng.random((6, 9)) / 9
    fam = builtin_linear_family(
        {"kernel": "tanh", "scale": 1.0},
        {"kernel": "tanh", "offset": 0.5, "scale": 0.25},
        {"kernel": "difference", "scale": 0.1},
    )
    cache = {}
    for _, c in fam.items():
        batch = c.batch(X, W, Y, cache=cache)
        for i in range(6):
            np.testing.assert_allclose(batch[i], c.evaluate(X[i], DiscreteMeasure(Y, W[i])), rtol=1e-12, atol=1e-15)
    assert set(cache) == {"tanh", "difference"}


def test_serialization():
    fam = builtin_linear_family({"kernel": "tanh", "scale": 1.0}, {"kernel": "tanh", "offset": 0.5},
                                {"kernel": "tanh"})
    assert CoefficientFamily.from_dict(fam.to_dict()) == fam
    assert fam.is_linear
    assert not CoefficientFamily.from_dict({"drift": {"kind": "mean_reverting", "scale": 1}}).is_linear
    with pytest.raises(ValueError):
        Coefficient.from_dict({"kind": "linear", "slope": 1})
    with pytest.raises(ValueError):
        CoefficientFamily.from_dict({"diffusion": {}})
    with pytest.raises(ValueError):
        Coefficient("linear", kernel="cubic")


def test_bounds():
    assert Coefficient("linear", kernel="tanh", offset=-0.5, scale=0.25).kernel_bound == 0.75
    assert Coefficient("linear", kernel="difference", scale=1.0).kernel_bound == np.inf
    assert Coefficient("mean_reverting", scale=0.5, rate=3.0).kernel_lipschitz == 1.5
    assert linear_bound_constant(1.0, 1.0) == 6.0
    assert linear_bound_constant(2.0, 0.5) == 16.0


def test_linear_measure_lipschitz_bound_on_probes():
    # |phi(x, mu) - phi(x, nu)|^2 <= C wop2^2 for measures with M_0 <= K m
    L, K = 1.0, 1.0
    C = linear_bound_constant(L, K)
    phi = Coefficient("linear", kernel="tanh", offset=0.5, scale=0.5)
    rng = np.random.default_rng(1)
    checked = 0
    for _ in range(400):
        mu = random_measure(rng, 1, max_atoms=6)
        nu = random_measure(rng, 1, max_atoms=6)
        ok = all(np.sum(m.atoms**2 * m.weights[:, None]) <= K * m.mass for m in (mu, nu))
        if not ok:
            continue
        checked += 1
        x = rng.normal(size=1)
        lhs = np.sum((phi.evaluate(x, mu) - phi.evaluate(x, nu)) ** 2)
        assert lhs <= C * wop2(mu, nu).value ** 2 + 1e-12
    assert checked > 20
