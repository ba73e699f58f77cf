import math

import numpy as np
import pytest

from conftest import central_difference, random_generator, random_spd
from sparseddd.expmat import (
    SeriesNotConverged,
    expm,
    expm_action,
    grad_relerr_cstar,
    grad_relerr_P,
    gradient_series,
    recursion_series,
)
from sparseddd.model import relative_error


def test_expm_two_state_closed_form():
    A = np.array([[-1.0, 1.0], [1.0, -1.0]])
    e = math.exp(-2.0)
    assert np.allclose(expm(A), 0.5 * np.array([[1 + e, 1 - e], [1 - e, 1 + e]]), atol=1e-15)


def test_expm_taylor_oracle(rng):
    A = 0.3 * rng.standard_normal((4, 4))
    taylor = sum(np.linalg.matrix_power(A, k) / math.factorial(k) for k in range(30))
    assert np.allclose(expm(A), taylor, atol=1e-14)


def test_expm_rejects_nan():
    with pytest.raises(ValueError):
        expm(np.array([[np.nan]]))


def test_expm_action_zero_time_and_negative(rng):
    P = random_generator(rng, 3)
    c = np.array([0.2, 0.3, 0.5])
    assert np.array_equal(expm_action(P, c, 0.0), c)
    with pytest.raises(ValueError):
        expm_action(P, c, -1.0)


def test_series_is_frechet_derivative(rng):
    # L(A, E) from the block-triangular identity expm([[A, E], [0, A]])
    A = 0.5 * rng.standard_normal((4, 4))
    E = rng.standard_normal((4, 4))
    big = expm(np.block([[A, E], [np.zeros((4, 4)), A]]))
    # recursion uses the transposed convention: sum S_k/(k+1)! = L(A, S0) with A = tP'
    assert np.allclose(recursion_series(A, E), big[:4, 4:], atol=1e-12)


@pytest.mark.parametrize("scale", [1.0, 20.0, 200.0])
def test_scaled_series_matches_block_identity(rng, scale):
    P = random_generator(rng, 5, scale)
    S0 = rng.standard_normal((5, 5))
    t = 0.7
    A = t * P.T
    big = expm(np.block([[A, S0], [np.zeros((5, 5)), A]]))
    ref = t * big[:5, 5:]
    assert np.allclose(gradient_series(P, t, S0), ref, rtol=1e-9, atol=1e-12 * np.abs(ref).max())


def test_series_not_converged_reports_partial():
    with pytest.raises(SeriesNotConverged) as info:
        recursion_series(np.eye(2) * 50.0, np.eye(2), k_max=5)
    assert info.value.partial_norm > 0


def test_gradients_match_central_differences(rng):
    for _ in range(10):
        n = 4
        P = random_generator(rng, n)
        c, cr = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))
        M = random_spd(rng, n)
        t = rng.random()
        fdP = central_difference(lambda X: relative_error(X, c, cr, M, t), P)
        fdc = central_difference(lambda v: relative_error(P, v, cr, M, t), c)
        gP = grad_relerr_P(P, c, cr, M, t)
        gc = grad_relerr_cstar(P, c, cr, M, t)
        assert np.linalg.norm(gP - fdP) <= 1e-6 * np.linalg.norm(fdP)
        assert np.linalg.norm(gc - fdc) <= 1e-6 * np.linalg.norm(fdc)


def test_zero_residual_gives_zero_gradient(rng):
    P = random_generator(rng, 3)
    c = np.array([0.2, 0.3, 0.5])
    target = expm(0.4 * P) @ c
    assert np.allclose(grad_relerr_P(P, c, target, np.eye(3), 0.4), 0.0, atol=1e-14)
