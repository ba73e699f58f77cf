import numpy as np
import pytest

from conftest import random_generator
from sparseddd.domain import CoefficientSeries, TimeGrid
from sparseddd.expmat import expm
from sparseddd.model import DENSE, SPARSE
from sparseddd.optimize import FitError, FitOptions, GeneratorCone, fit, project_simplex
from sparseddd.quadrature import mass_matrix_from_dense

P_TRUE = np.array([[-1.0, 0.5, 0.2], [0.6, -0.9, 0.3], [0.4, 0.4, -0.5]])
C0 = np.array([0.7, 0.2, 0.1])
M3 = np.array([[2 / 3, 1 / 6, 0.0], [1 / 6, 2 / 3, 1 / 6], [0.0, 1 / 6, 2 / 3]])


def recovery_problem():
    grid = TimeGrid([0.0, 1.0, 2.0, 3.0, 4.0, 5.0])
    unit = grid.times / 5.0
    series = CoefficientSeries(grid, np.stack([expm(t * P_TRUE) @ C0 for t in unit]))
    return series, mass_matrix_from_dense(M3, np.ones((3, 3), dtype=bool))


def test_project_simplex_by_hand():
    assert np.allclose(project_simplex([0.6, 0.6, 0.0]), [0.5, 0.5, 0.0])
    assert np.allclose(project_simplex([0.2, 0.3, 0.5]), [0.2, 0.3, 0.5])
    assert np.allclose(project_simplex([-1.0, 3.0]), [0.0, 1.0])


def test_project_simplex_is_nearest(rng):
    v = rng.standard_normal(6)
    p = project_simplex(v)
    assert p.min() >= 0 and p.sum() == pytest.approx(1.0)
    for _ in range(200):
        q = rng.dirichlet(np.ones(6))
        assert np.linalg.norm(v - p) <= np.linalg.norm(v - q) + 1e-12


def test_dense_cone_round_trip(rng):
    cone = GeneratorCone(DENSE, 4)
    P = random_generator(rng, 4)
    assert np.allclose(cone.to_generator(cone.from_generator(P)), P)
    assert cone.free_count == 12


def test_sparse_cone_keeps_q_on_pattern(rng):
    # banded mass matrix: tridiagonal pattern on 5 functions
    M = np.diag(np.full(5, 2 / 3)) + np.diag(np.full(4, 1 / 6), 1) + np.diag(np.full(4, 1 / 6), -1)
    pattern = M != 0
    cone = GeneratorCone(SPARSE, 5, M, pattern)
    x = cone.project(rng.random((5, 5)))
    Q_full = M @ cone.to_generator(x)
    assert np.abs(Q_full[~pattern]).max(initial=0.0) < 1e-15
    assert cone.free_count > 0
    # any non-allowed transition would leak mass outside the pattern
    for i, j in zip(*np.nonzero(~cone.allowed & ~np.eye(5, dtype=bool))):
        e = np.zeros((5, 5))
        e[i, j] = 1.0
        leak = (M @ cone.to_generator(e))[~pattern]
        assert np.abs(leak).max() > 0


def test_sparse_cone_rejects_negative_mass():
    M = np.array([[1.0, -0.1, 0.0], [-0.1, 1.0, 0.0], [0.0, 0.0, 1.0]])
    with pytest.raises(ValueError):
        GeneratorCone(SPARSE, 3, M, M != 0)


@pytest.mark.parametrize("method", ["ddd", "sparse-ddd"])
def test_exact_recovery(method):
    series, M = recovery_problem()
    model, report = fit(method, M, series, time_span=(0.0, 5.0))
    assert report.mean_error <= 1e-3
    assert model.feasibility_violation() <= 1e-8
    pred = np.stack([expm(t * model.P) @ model.c_star for t in series.grid.times / 5.0])
    assert np.abs(pred - series.coeffs).max() <= 1e-3


def test_loss_history_monotone():
    series, M = recovery_problem()
    _, report = fit("ddd", M, series, options=FitOptions(max_iters=200), time_span=(0.0, 5.0))
    hist = np.array(report.loss_history)
    assert np.all(np.diff(hist) <= 0)
    assert report.iterations == 200 and not report.converged


def test_restarts_are_seeded():
    series, M = recovery_problem()
    opts = FitOptions(max_iters=30, restarts=3, seed=11)
    a = fit("ddd", M, series, options=opts, time_span=(0.0, 5.0))[1].loss_history
    b = fit("ddd", M, series, options=opts, time_span=(0.0, 5.0))[1].loss_history
    assert a == b


def test_callback_sees_every_iteration():
    series, M = recovery_problem()
    seen = []
    fit("ddd", M, series, options=FitOptions(max_iters=15), time_span=(0.0, 5.0),
        callback=lambda it, f, *rest: seen.append(it))
    assert seen == list(range(1, 16))


def test_fit_error_when_nothing_moves():
    # a zero iteration budget neither decreases the loss nor converges
    series, M = recovery_problem()
    with pytest.raises(FitError) as info:
        fit("ddd", M, series, options=FitOptions(max_iters=0), time_span=(0.0, 5.0))
    assert info.value.model is not None


def test_options_validation():
    with pytest.raises(ValueError):
        FitOptions(grad_tolerance=0.0)
    with pytest.raises(ValueError):
        FitOptions(initializer="magic")
    with pytest.raises(ValueError):
        fit("dmd", np.eye(2))
