import json
import pathlib

import numpy as np
import pytest

from graphonlab.config import parse_config
from graphonlab.measures import DiscreteMeasure, PathMeasure

ROOT = pathlib.Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

# lines reported by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def load_doc(name="linear_tanh.json") -> dict:
    return json.loads((CONFIGS / name).read_text())


@pytest.fixture
def base_doc():
    return load_doc()


@pytest.fixture
def cfg():
    return parse_config(load_doc())


def small_config(**overrides):
    """Fixture config on a short horizon for fast unit tests."""
    doc = load_doc()
    doc.update({"T": 0.125, "dt": 1 / 32})
    doc.update(overrides)
    return parse_config(doc)


def random_measure(rng, d, max_atoms=12, max_mass=3.0, zero_prob=0.0):
    k = int(rng.integers(1, max_atoms + 1))
    atoms = rng.normal(size=(k, d)) * rng.uniform(0.2, 3.0)
    w = rng.random(k)
    w[rng.random(k) < zero_prob] = 0.0
    mass = rng.uniform(0, max_mass)
    if w.sum() == 0:
        return DiscreteMeasure(atoms, np.zeros(k))
    return DiscreteMeasure(atoms, w / w.sum() * mass)


def random_path_measure(rng, d, grid, max_atoms=8, mass=None):
    k = int(rng.integers(1, max_atoms + 1))
    steps = rng.normal(size=(k, len(grid), d)) * 0.5
    atoms = np.cumsum(steps, axis=1)
    w = rng.random(k) + 0.05
    mass = rng.uniform(0.1, 3.0) if mass is None else mass
    return PathMeasure(grid, atoms, w / w.sum() * mass)
