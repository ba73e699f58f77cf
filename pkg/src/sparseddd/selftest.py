"""Quick numerical oracle checks, run by ``sparseddd selftest``.

Each check compares a library routine against an independent closed form
or a brute-force computation and prints one PASS/FAIL line.
"""

from __future__ import annotations

import math

import numpy as np

from .basis import BasisSet, eval_basis, select_radii
from .expmat import expm, grad_relerr_cstar, grad_relerr_P
from .model import project_generator, relative_error
from .optimize import project_simplex
from .quadrature import halton_point, mass_matrix


def _random_generator(rng, n):
    P = rng.random((n, n))
    np.fill_diagonal(P, 0.0)
    np.fill_diagonal(P, -P.sum(axis=0))
    return P


def _random_spd(rng, n):
    A = rng.standard_normal((n, n))
    return A @ A.T + n * np.eye(n)


def _fd_gradient(f, x, h=1e-6):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        g[idx] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def check_halton():
    return np.allclose(halton_point(1, 2), [0.5, 1 / 3]) and np.isclose(halton_point(3, 1)[0], 0.75)


def check_basis():
    b1 = BasisSet(np.array([[0.0], [1.0], [3.0]]), [2.0, 2.0, 2.0])
    b2 = BasisSet(np.zeros((3, 2)) + np.arange(3)[:, None], [1.0, 1.0, 1.0])
    return (math.isclose(eval_basis([0.0], 0, b1), 0.5)
            and math.isclose(eval_basis([0.0, 0.0], 0, b2), 3 / math.pi)
            and np.allclose(select_radii([[0.0], [1.0], [3.0]]), [3.0, 2.0, 3.0]))


def check_mass_matrix():
    basis = BasisSet(np.array([[0.0], [1.0], [3.0]]), [1.0, 1.0, 1.0])
    M = mass_matrix(basis, 100_000).dense()
    return abs(M[0, 0] - 2 / 3) / (2 / 3) < 1e-3 and abs(M[0, 1] - 1 / 6) / (1 / 6) < 1e-3


def check_expm():
    A = np.array([[-1.0, 1.0], [1.0, -1.0]])
    taylor = sum(np.linalg.matrix_power(A, k) / math.factorial(k) for k in range(40))
    return np.allclose(expm(A), taylor, atol=1e-14)


def check_projections():
    P = project_generator(np.array([[0.0, -1.0], [2.0, 0.0]]))
    return (np.allclose(project_simplex([0.6, 0.6, 0.0]), [0.5, 0.5, 0.0])
            and np.allclose(P, [[-2.0, 0.0], [2.0, 0.0]]))


def check_gradients(n=5, trials=5, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        P = _random_generator(rng, n)
        c, cr = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))
        M = _random_spd(rng, n)
        t = rng.random()
        gP = grad_relerr_P(P, c, cr, M, t)
        fdP = _fd_gradient(lambda X: relative_error(X, c, cr, M, t), P)
        gc = grad_relerr_cstar(P, c, cr, M, t)
        fdc = _fd_gradient(lambda v: relative_error(P, v, cr, M, t), c)
        worst = max(worst, np.linalg.norm(gP - fdP) / np.linalg.norm(fdP),
                    np.linalg.norm(gc - fdc) / np.linalg.norm(fdc))
    return worst < 1e-5


CHECKS = {
    "halton radical inverse": check_halton,
    "cone basis values and radii": check_basis,
    "1D mass matrix vs closed form": check_mass_matrix,
    "matrix exponential vs Taylor": check_expm,
    "simplex and generator projections": check_projections,
    "analytic gradients vs finite differences": check_gradients,
}


def run(verbose: bool = True) -> bool:
    ok = True
    for name, check in CHECKS.items():
        passed = bool(check())
        ok &= passed
        if verbose:
            print(f"{'PASS' if passed else 'FAIL'}  {name}")
    return ok
