import numpy as np
import pytest

from dpdlogit.basis import make_basis, make_uniform_grid
from dpdlogit.model import FunctionalDataset, build_design
from dpdlogit.simulation import beta_true, generate_curves, generate_labels

ACCEPTANCE_LINES = []


def simulated(n, seed, beta_index=1, m=100, scale=1.0):
    rng = np.random.default_rng(seed)
    grid = make_uniform_grid(m)
    X = generate_curves(n, grid, rng)
    y = generate_labels(X, scale * beta_true(beta_index, grid), grid, "logit", rng)
    return FunctionalDataset(X, y, grid)


@pytest.fixture(scope="session")
def clean_data():
    return simulated(200, seed=3)


@pytest.fixture(scope="session")
def clean_design(clean_data):
    basis = make_basis(12, 4)
    return basis, build_design(clean_data, basis)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
