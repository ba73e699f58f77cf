"""Constrained fitting of generator models.

Spectral projected gradient: each step projects ``x - alpha * grad`` back
onto the feasible set and backtracks (halving ``alpha``) until an Armijo
decrease holds, so every accepted iterate is feasible and the loss never
increases. The trial step length is the Barzilai-Borwein estimate from
the previous step (1.0 on the first).

Feasible sets:

* dense ``P``: off-diagonals are the variables (clamped at 0), diagonals
  follow from the zero column sums.
* sparse ``Q``: reduces to the same box on a mask of allowed transitions
  (see :class:`GeneratorCone`); ``Q = M P`` is formed at the end.
* ``c*``: the probability simplex.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .model import (
    DENSE,
    SPARSE,
    FitReport,
    GeneratorModel,
    Objective,
    count_parameters,
)

logger = logging.getLogger(__name__)

INITIALIZERS = ("zero", "uniform-generator", "random-generator")


class FitError(RuntimeError):
    """Raised when no restart decreased the loss; carries the best model."""

    def __init__(self, message, model=None, report=None):
        super().__init__(message)
        self.model = model
        self.report = report


@dataclass(frozen=True)
class FitOptions:
    max_iters: int = 5000
    grad_tolerance: float = 1e-6
    feasibility_tolerance: float = 1e-8
    lam: float = 0.01
    seed: int = 0
    restarts: int = 1
    initializer: str = "zero"
    armijo: float = 1e-4
    max_backtracks: int = 60

    def __post_init__(self):
        if self.grad_tolerance <= 0 or self.feasibility_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.initializer not in INITIALIZERS:
            raise ValueError(f"initializer must be one of {INITIALIZERS}")


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto ``{c >= 0, sum(c) = 1}`` (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


class GeneratorCone:
    """Feasible set of one parametrisation together with its projection.

    For the sparse parametrisation ``Q = M P`` must vanish outside the
    pattern. With an entrywise non-negative ``M`` the off-pattern entries
    of column ``j`` are sums of non-negative terms ``M_ki P_ij``, so they
    vanish exactly when ``P_ij = 0`` for every ``i`` whose overlap set
    ``{k : M_ki != 0}`` leaves the pattern of column ``j``. The feasible
    ``Q`` are therefore the images of generators on a fixed mask of
    allowed transitions, and the variables are those off-diagonal entries
    (box constrained at zero).
    """

    def __init__(self, kind: str, N: int, M=None, pattern=None):
        self.kind = kind
        self.N = N
        allowed = ~np.eye(N, dtype=bool)
        if kind == SPARSE:
            self.M = M
            self.pattern = np.asarray(pattern, dtype=bool)
            Md = M.dense() if hasattr(M, "dense") else np.asarray(M, dtype=float)
            support = Md != 0
            if not self.pattern.all():
                if np.any(Md < 0):
                    raise ValueError("sparse fitting needs an entrywise non-negative mass matrix")
                if np.any(support & ~self.pattern):
                    raise ValueError("mass matrix has entries outside its sparsity pattern")
            # allowed[i, j]: every k with M_ki != 0 lies in the pattern of column j
            leaks = support.astype(float).T @ (~self.pattern).astype(float)
            allowed &= leaks == 0
            self._Md = Md
        self.allowed = allowed

    @property
    def free_count(self) -> int:
        return int(self.allowed.sum())

    def to_generator(self, x) -> np.ndarray:
        P = x.copy()
        np.fill_diagonal(P, -x.sum(axis=0))
        return P

    def to_q(self, x) -> np.ndarray:
        Q = self._Md @ self.to_generator(x)
        return np.where(self.pattern, Q, 0.0)

    def pull_back(self, gP) -> np.ndarray:
        """Gradient in the variables from the gradient w.r.t. ``P``."""
        g = gP - np.diag(gP)[None, :]
        return np.where(self.allowed, g, 0.0)

    def project(self, x) -> np.ndarray:
        return np.where(self.allowed, np.maximum(x, 0.0), 0.0)

    def from_generator(self, P) -> np.ndarray:
        return self.project(np.asarray(P, dtype=float))


def _init_variables(cone: GeneratorCone, options: FitOptions, restart: int) -> np.ndarray:
    N = cone.N
    base = np.zeros((N, N))
    if options.initializer == "uniform-generator":
        base = np.full((N, N), 1.0 / N)
        np.fill_diagonal(base, 0.0)
    elif options.initializer == "random-generator" or restart > 0:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(options.seed, spawn_key=(restart,))))
        noise = np.abs(rng.standard_normal((N, N))) / N
        np.fill_diagonal(noise, 0.0)
        base = base + noise
    P0 = base.copy()
    np.fill_diagonal(P0, -base.sum(axis=0))
    return cone.from_generator(P0)


def _spg(objective: Objective, cone: GeneratorCone, x0, c0, options: FitOptions,
         callback: Optional[Callable] = None):
    free_c = c0 is not None

    def evaluate(x, c):
        P = cone.to_generator(x)
        f, gP, gc = objective.value_and_grad(P, c)
        return f, cone.pull_back(gP), gc

    def project(x, c):
        return cone.project(x), (project_simplex(c) if free_c else None)

    def pg_norm(x, c, gx, gc):
        px, pc = project(x - gx, None if c is None else c - gc)
        sq = np.sum((px - x) ** 2)
        if free_c:
            sq += np.sum((pc - c) ** 2)
        return float(np.sqrt(sq))

    x, c = project(x0, c0)
    f, gx, gc = evaluate(x, c)
    history = [f]
    alpha = 1.0
    it = 0
    pgn = pg_norm(x, c, gx, gc)
    converged = pgn <= options.grad_tolerance
    while not converged and it < options.max_iters:
        accepted = False
        step = alpha
        for _ in range(options.max_backtracks):
            xt, ct = project(x - step * gx, None if c is None else c - step * gc)
            dx = xt - x
            slope = float(np.sum(gx * dx))
            if free_c:
                dc = ct - c
                slope += float(gc @ dc)
            ft, gxt, gct = evaluate(xt, ct)
            if ft <= f + options.armijo * slope and ft <= f:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            logger.info("line search failed at iteration %d; stopping", it)
            break
        sy = float(np.sum(dx * (gxt - gx)))
        ss = float(np.sum(dx * dx))
        if free_c:
            sy += float(dc @ (gct - gc))
            ss += float(dc @ dc)
        x, c, f, gx, gc = xt, ct, ft, gxt, gct
        it += 1
        history.append(f)
        pgn = pg_norm(x, c, gx, gc)
        logger.debug("iter %d loss %.6e pgrad %.3e step %.3e", it, f, pgn, step)
        if callback is not None:
            callback(it, f, pgn, step, cone.to_generator(x), c)
        converged = pgn <= options.grad_tolerance
        if ss == 0.0:
            break
        alpha = ss / sy if sy > 0 else 1e6
        alpha = min(max(alpha, 1e-12), 1e12)
    return x, c, history, it, pgn, converged


def fit(method: str, M, snapshots=None, trajectories=None, options: FitOptions = FitOptions(),
        pattern=None, time_span=(0.0, 1.0), basis_hash: str = "", mass_hash: str = "",
        callback: Optional[Callable] = None):
    """Fit a dense (``"ddd"``) or sparse (``"sparse-ddd"``) generator model.

    Snapshot data contribute a free initial condition ``c*`` on the simplex;
    trajectory data are pinned to their first observation. With both, the
    losses are mixed with weight ``options.lam`` on the trajectories.

    Returns ``(GeneratorModel, FitReport)``.
    """
    kind = {"ddd": DENSE, "sparse-ddd": SPARSE, DENSE: DENSE, SPARSE: SPARSE}.get(method)
    if kind is None:
        raise ValueError(f"unknown method {method!r}")
    lam = options.lam if (snapshots is not None and trajectories is not None) else None
    objective = Objective(M, snapshots, trajectories, lam)
    N = (snapshots if snapshots is not None else trajectories).N
    if kind == SPARSE:
        if pattern is None:
            pattern = M.pattern
    cone = GeneratorCone(kind, N, M, pattern)
    c0 = None if snapshots is None else project_simplex(snapshots.coeffs[0])

    start = time.perf_counter()
    best = None
    total_iters = 0
    decreased = False
    for restart in range(options.restarts):
        x0 = _init_variables(cone, options, restart)
        x, c, hist, iters, pgn, converged = _spg(objective, cone, x0, c0, options, callback)
        total_iters += iters
        decreased |= hist[-1] < hist[0]
        if best is None or hist[-1] < best[2][-1]:
            best = (x, c, hist, pgn, converged)
    x, c, hist, pgn, converged = best
    wall = time.perf_counter() - start

    P = cone.to_generator(x)
    model = GeneratorModel(
        kind=kind, P=P, c_star=c,
        Q=cone.to_q(x) if kind == SPARSE else None,
        pattern=np.asarray(pattern, dtype=bool) if kind == SPARSE else None,
        time_span=tuple(float(v) for v in time_span),
        basis_hash=basis_hash, mass_hash=mass_hash,
    )
    errors = objective.per_time_errors(P, c)
    flat = np.concatenate([np.asarray(v)[1:] if k == "trajectory" else np.asarray(v)
                           for k, v in errors.items()])
    params, dof = count_parameters(model)
    report = FitReport(
        per_time_errors=errors,
        mean_error=float(np.mean(flat)),
        mean_squared_error=float(np.mean(flat**2)),
        parameter_count=params,
        dof_count=dof,
        iterations=total_iters,
        wall_time=wall,
        loss_history=hist,
        final_grad_norm=pgn,
        converged=bool(converged),
    )
    violation = model.feasibility_violation()
    if violation > options.feasibility_tolerance:
        raise FitError(f"fitted model violates constraints by {violation:.3e}", model, report)
    if not decreased and not converged:
        raise FitError("loss did not decrease over the restart budget", model, report)
    logger.info("fit %s: loss %.4e after %d iterations (%.1fs), %d parameters / %d dof",
                method, hist[-1], total_iters, wall, params, dof)
    return model, report
