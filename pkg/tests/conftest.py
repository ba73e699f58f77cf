import numpy as np
import pytest

from sparseddd.basis import build_basis
from sparseddd.quadrature import mass_matrix
from sparseddd.simulate import SdeConfig, build_datasets, simulate_paths


def random_generator(rng, n, scale=1.0):
    P = rng.random((n, n)) * scale
    np.fill_diagonal(P, 0.0)
    np.fill_diagonal(P, -P.sum(axis=0))
    return P


def random_spd(rng, n):
    A = rng.standard_normal((n, n))
    return A @ A.T + n * np.eye(n)


def central_difference(f, x, h=1e-6):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        g[idx] = (f(x + e) - f(x - e)) / (2 * h)
    return g


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_benchmark():
    """120 simulated paths, their four datasets, a 12-function basis and M."""
    parent = simulate_paths(SdeConfig(n_paths=120, seed=7))
    datasets = build_datasets(parent, seed=7, n_trajectories=40, n_integrated=5)
    basis = build_basis(datasets["full-snapshot"].all_points(), 12, seed=7)
    M = mass_matrix(basis, 5000)
    return parent, datasets, basis, M


# one summary line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
