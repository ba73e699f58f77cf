import numpy as np
import pytest

from conftest import central_difference, random_generator, random_spd
from sparseddd.domain import CoefficientSeries, TimeGrid, TrajectoryCoefficients
from sparseddd.expmat import expm
from sparseddd.model import (
    DENSE,
    SPARSE,
    GeneratorModel,
    ModelError,
    Objective,
    count_parameters,
    evaluate_errors,
    grad_loss_Q,
    integrated_loss,
    project_generator,
    q_to_p,
    relative_error,
    snapshot_loss,
    trajectory_loss,
)


def _series(rng, n, times, P=None, noise=0.0):
    grid = TimeGrid(times)
    c0 = rng.dirichlet(np.ones(n))
    unit = (grid.times - grid.times[0]) / (grid.times[-1] - grid.times[0])
    if P is None:
        rows = rng.dirichlet(np.ones(n), size=len(times))
    else:
        rows = np.stack([expm(t * P) @ c0 for t in unit])
    rows = np.abs(rows + noise * rng.random(rows.shape))
    return CoefficientSeries(grid, rows / rows.sum(axis=1, keepdims=True))


def _paths(rng, n, K, times):
    return TrajectoryCoefficients(TimeGrid(times), rng.dirichlet(np.ones(n), size=(K, len(times))))


def test_relative_error_by_hand():
    assert relative_error(np.zeros((2, 2)), [1.0, 0.0], [0.5, 0.5], np.eye(2), 0.3) == pytest.approx(1.0)


def test_relative_error_zero_norm():
    with pytest.raises(ModelError):
        relative_error(np.zeros((2, 2)), [1.0, 0.0], [0.0, 0.0], np.eye(2), 0.3)


def test_project_generator_by_hand():
    assert np.allclose(project_generator([[0.0, -1.0], [2.0, 0.0]]), [[-2.0, 0.0], [2.0, 0.0]])


def test_generator_keeps_simplex(rng):
    P = random_generator(rng, 6, 3.0)
    c = rng.dirichlet(np.ones(6))
    for t in (0.1, 0.5, 1.0):
        out = expm(t * P) @ c
        assert out.min() >= -1e-12 and out.sum() == pytest.approx(1.0, abs=1e-12)


def test_objective_matches_direct_losses(rng):
    n = 4
    M = random_spd(rng, n)
    snaps = _series(rng, n, [0.0, 1.0, 3.0, 4.0])
    trajs = _paths(rng, n, 6, [0.0, 2.0, 4.0])
    P = random_generator(rng, n)
    c = rng.dirichlet(np.ones(n))
    model = GeneratorModel(DENSE, P, c)
    assert Objective(M, snaps).value(P, c) == pytest.approx(snapshot_loss(model, snaps, M), rel=1e-12)
    assert Objective(M, None, trajs).value(P) == pytest.approx(trajectory_loss(model, trajs, M), rel=1e-12)
    both = Objective(M, snaps, trajs, lam=0.3).value(P, c)
    assert both == pytest.approx(integrated_loss(model, snaps, trajs, M, 0.3), rel=1e-12)


def test_integrated_lambda_bounds(rng):
    M = np.eye(3)
    with pytest.raises(ModelError):
        Objective(M, _series(rng, 3, [0.0, 1.0]), _paths(rng, 3, 2, [0.0, 1.0]), lam=1.0)


def test_objective_gradient(rng):
    n = 4
    M = random_spd(rng, n)
    obj = Objective(M, _series(rng, n, [0.0, 1.0, 3.0]), _paths(rng, n, 5, [0.0, 1.0, 2.0, 3.0]), lam=0.2)
    P = random_generator(rng, n)
    c = rng.dirichlet(np.ones(n))
    _, gP, gc = obj.value_and_grad(P, c)
    fdP = central_difference(lambda X: obj.value(X, c), P)
    fdc = central_difference(lambda v: obj.value(P, v), c)
    assert np.linalg.norm(gP - fdP) <= 1e-6 * np.linalg.norm(fdP)
    assert np.linalg.norm(gc - fdc) <= 1e-6 * np.linalg.norm(fdc)


def test_grad_loss_q_pattern_entries(rng):
    n = 4
    M = random_spd(rng, n)
    pattern = np.ones((n, n), dtype=bool)
    pattern[0, 3] = pattern[3, 0] = False
    obj = Objective(M, _series(rng, n, [0.0, 1.0, 2.0]))
    P = random_generator(rng, n)
    c = rng.dirichlet(np.ones(n))
    Q = M @ P
    g = grad_loss_Q(obj, P, c, M, pattern)
    fd = central_difference(lambda X: obj.value(np.linalg.solve(M, X), c), Q)
    assert np.allclose(g[pattern], fd[pattern], rtol=1e-5, atol=1e-9)
    assert np.all(g[~pattern] == 0)


def test_q_to_p_round_trip(rng):
    M = random_spd(rng, 4)
    P = random_generator(rng, 4)
    assert np.allclose(q_to_p(M @ P, M), P)


def test_parameter_counts():
    dense = GeneratorModel(DENSE, np.zeros((30, 30)))
    assert count_parameters(dense) == (900, 870)
    pattern = np.eye(5, dtype=bool)
    pattern[0, 1] = pattern[1, 0] = True
    sparse = GeneratorModel(SPARSE, np.zeros((5, 5)), Q=np.zeros((5, 5)), pattern=pattern)
    assert count_parameters(sparse) == (7, 2)


def test_feasibility_violation(rng):
    P = random_generator(rng, 3)
    assert GeneratorModel(DENSE, P, np.array([0.2, 0.3, 0.5])).feasibility_violation() < 1e-15
    bad = P.copy()
    bad[0, 1] = -0.5
    assert GeneratorModel(DENSE, bad).feasibility_violation() > 0.1


def test_model_json_round_trip(tmp_path, rng):
    P = random_generator(rng, 3)
    pattern = np.ones((3, 3), dtype=bool)
    pattern[0, 2] = pattern[2, 0] = False
    Q = np.where(pattern, P, 0.0)
    m = GeneratorModel(SPARSE, P, np.array([0.2, 0.3, 0.5]), Q, pattern, (0.0, 89.0), "b", "m")
    m.save(tmp_path / "m.json")
    back = GeneratorModel.load(tmp_path / "m.json")
    assert np.array_equal(back.P, P) and np.array_equal(back.Q, Q) and np.array_equal(back.pattern, pattern)
    assert back.time_span == (0.0, 89.0) and back.basis_hash == "b"


def test_evaluate_reproduces_training_errors(rng):
    n = 4
    M = random_spd(rng, n)
    series = _series(rng, n, [0.0, 1.0, 2.0, 3.0, 5.0, 8.0, 13.0])
    P = random_generator(rng, n)
    c = rng.dirichlet(np.ones(n))
    model = GeneratorModel(DENSE, P, c, time_span=(0.0, 13.0))
    train = Objective(M, series).per_time_errors(P, c)["snapshot"]
    assert np.array_equal(evaluate_errors(model, series, M), np.array(train))


def test_evaluate_without_c_star_uses_first_observation(rng):
    n = 3
    P = random_generator(rng, n)
    series = _series(rng, n, [0.0, 1.0, 2.0], P=P)
    errs = evaluate_errors(GeneratorModel(DENSE, P, time_span=(0.0, 2.0)), series, np.eye(n))
    assert errs[0] == 0.0 and np.all(errs < 1e-12)
