"""Generator models, relative-error losses and their gradients.

Two parametrisations share the same loss:

* ``dense``: the generator ``P`` itself, with non-negative off-diagonals
  and zero column sums.
* ``sparse``: the weak-form matrix ``Q`` restricted to the mass-matrix
  sparsity pattern, with ``P = M^{-1} Q`` required to be a generator.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .domain import CoefficientSeries, TimeGrid, TrajectoryCoefficients, rescale_time_grid
from .expmat import _dense, expm, gradient_series

logger = logging.getLogger(__name__)

DENSE = "dense"
SPARSE = "sparse"


class ModelError(ValueError):
    pass


@dataclass
class GeneratorModel:
    kind: str
    P: np.ndarray
    c_star: Optional[np.ndarray] = None
    Q: Optional[np.ndarray] = None
    pattern: Optional[np.ndarray] = None
    time_span: tuple = (0.0, 1.0)
    basis_hash: str = ""
    mass_hash: str = ""

    def __post_init__(self):
        if self.kind not in (DENSE, SPARSE):
            raise ModelError(f"unknown model kind {self.kind!r}")
        self.P = np.asarray(self.P, dtype=float)
        if self.c_star is not None:
            self.c_star = np.asarray(self.c_star, dtype=float)
        if self.kind == SPARSE:
            if self.Q is None or self.pattern is None:
                raise ModelError("sparse models need Q and its pattern")
            self.Q = np.asarray(self.Q, dtype=float)
            self.pattern = np.asarray(self.pattern, dtype=bool)

    @property
    def N(self) -> int:
        return self.P.shape[0]

    def feasibility_violation(self) -> float:
        """Largest violation of the generator, pattern and simplex constraints."""
        P = self.P
        off = P - np.diag(np.diag(P))
        scale = max(1.0, np.abs(P).max())
        worst = max(np.abs(P.sum(axis=0)).max() / scale, max(0.0, -off.min()) / scale)
        if self.kind == SPARSE:
            worst = max(worst, float(np.abs(self.Q[~self.pattern]).max(initial=0.0)))
        if self.c_star is not None:
            worst = max(worst, max(0.0, -self.c_star.min()), abs(self.c_star.sum() - 1.0))
        return float(worst)

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "N": self.N,
            "P": self.P.tolist(),
            "c_star": None if self.c_star is None else self.c_star.tolist(),
            "time_span": list(self.time_span),
            "basis_hash": self.basis_hash,
            "mass_hash": self.mass_hash,
        }
        if self.kind == SPARSE:
            ii, jj = np.nonzero(self.pattern)
            out["pattern"] = [[int(i), int(j)] for i, j in zip(ii, jj)]
            out["Q_values"] = [float(self.Q[i, j]) for i, j in zip(ii, jj)]
        return out

    @classmethod
    def from_dict(cls, payload: dict) -> "GeneratorModel":
        N = payload["N"]
        Q = pattern = None
        if payload["kind"] == SPARSE:
            pattern = np.zeros((N, N), dtype=bool)
            Q = np.zeros((N, N))
            for (i, j), v in zip(payload["pattern"], payload["Q_values"]):
                pattern[i, j] = True
                Q[i, j] = v
        return cls(
            kind=payload["kind"],
            P=np.array(payload["P"], dtype=float),
            c_star=None if payload["c_star"] is None else np.array(payload["c_star"]),
            Q=Q,
            pattern=pattern,
            time_span=tuple(payload["time_span"]),
            basis_hash=payload.get("basis_hash", ""),
            mass_hash=payload.get("mass_hash", ""),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "GeneratorModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class FitReport:
    """Outcome of a fit.

    ``per_time_errors`` maps a data role ("snapshot", "trajectory") to the
    unsquared relative errors at each grid time. ``mean_error`` is the mean
    of those errors (the figure compared against published tables) and
    ``mean_squared_error`` the mean of their squares.
    """

    per_time_errors: dict = field(default_factory=dict)
    mean_error: float = float("nan")
    mean_squared_error: float = float("nan")
    parameter_count: int = 0
    dof_count: int = 0
    iterations: int = 0
    wall_time: float = 0.0
    loss_history: list = field(default_factory=list)
    final_grad_norm: float = float("nan")
    converged: bool = False

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "per_time_errors": {k: [float(v) for v in vals] for k, vals in self.per_time_errors.items()},
            "mean_error": self.mean_error,
            "mean_squared_error": self.mean_squared_error,
            "parameter_count": self.parameter_count,
            "dof_count": self.dof_count,
            "iterations": self.iterations,
            "loss_history": [float(v) for v in self.loss_history],
            "final_grad_norm": self.final_grad_norm,
            "converged": self.converged,
        }
        if include_timing:
            out["wall_time"] = self.wall_time
        return out


# -- basic quantities --------------------------------------------------------

def unit_times(grid: TimeGrid) -> np.ndarray:
    return grid.times if grid.rescaled else rescale_time_grid(grid).times


def relative_error(P, c_star, c_r, M, t_r: float) -> float:
    """Squared M-weighted relative prediction error at time ``t_r``."""
    M = _dense(M)
    c_r = np.asarray(c_r, dtype=float)
    norm = float(c_r @ M @ c_r)
    if norm <= 0:
        raise ModelError("observed coefficients have zero M-norm")
    pred = expm(t_r * np.asarray(P, dtype=float)) @ np.asarray(c_star, dtype=float)
    resid = pred - c_r
    return float(resid @ M @ resid) / norm


def snapshot_loss(model: GeneratorModel, series: CoefficientSeries, M) -> float:
    """Mean squared relative error over all snapshot times (free ``c*``)."""
    if series.coeffs.shape[0] == 0:
        raise ModelError("empty coefficient series")
    if model.c_star is None:
        raise ModelError("snapshot loss needs the model's initial coefficients")
    times = unit_times(series.grid)
    errs = [relative_error(model.P, model.c_star, c, M, t) for t, c in zip(times, series.coeffs)]
    return float(np.mean(errs))


def trajectory_loss(model: GeneratorModel, series: TrajectoryCoefficients, M) -> float:
    """Trajectory loss with each path pinned to its first observation.

    Normalised by ``K (R+1)`` with the ``r = 0`` terms identically zero.
    Paths whose first point is not covered by the basis are skipped.
    """
    times = unit_times(series.grid)
    R1 = len(times)
    if R1 < 2:
        logger.warning("trajectories with a single time contribute nothing")
        return 0.0
    total, K = 0.0, 0
    for path in series.coeffs:
        if np.any(np.isnan(path[0])):
            continue
        K += 1
        for t, c in zip(times[1:], path[1:]):
            if np.any(np.isnan(c)):
                continue
            total += relative_error(model.P, path[0], c, M, t)
    if K == 0:
        raise ModelError("no usable trajectories")
    return total / (K * R1)


def integrated_loss(model, snapshots: CoefficientSeries, trajectories: TrajectoryCoefficients, M, lam: float) -> float:
    if not 0 < lam < 1:
        raise ModelError(f"lambda must lie in (0, 1), got {lam}")
    return lam * trajectory_loss(model, trajectories, M) + (1 - lam) * snapshot_loss(model, snapshots, M)


def q_to_p(Q, M) -> np.ndarray:
    """``P = M^{-1} Q`` via the mass matrix factorisation."""
    Q = np.asarray(Q, dtype=float)
    if hasattr(M, "solve"):
        return M.solve(Q)
    import scipy.linalg

    try:
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(np.asarray(M, dtype=float)), Q)
    except np.linalg.LinAlgError as exc:
        raise ModelError("mass matrix is singular") from exc


def project_generator(P_raw) -> np.ndarray:
    """Clamp off-diagonals at zero and reset diagonals to balance columns."""
    P = np.array(P_raw, dtype=float)
    np.fill_diagonal(P, 0.0)
    P = np.maximum(P, 0.0)
    np.fill_diagonal(P, -P.sum(axis=0))
    return P


def count_parameters(model: GeneratorModel) -> tuple:
    """``(parameters, degrees of freedom)``; column sums remove ``N``."""
    N = model.N
    if model.kind == DENSE:
        return N * N, N * (N - 1)
    n = int(np.count_nonzero(model.pattern))
    return n, n - N


# -- fitting objective -------------------------------------------------------

class Objective:
    """Loss and analytic gradient over ``(P, c*)`` for a fixed dataset.

    Terms are grouped by observation time so each distinct time needs one
    matrix exponential and one gradient series regardless of how many
    trajectories are observed then.
    """

    def __init__(self, M, snapshots: Optional[CoefficientSeries] = None,
                 trajectories: Optional[TrajectoryCoefficients] = None, lam: Optional[float] = None):
        if snapshots is None and trajectories is None:
            raise ModelError("objective needs snapshot or trajectory data")
        self.M = _dense(M)
        self.has_snapshots = snapshots is not None
        self.has_trajectories = trajectories is not None
        if self.has_snapshots and self.has_trajectories:
            if lam is None or not 0 < lam < 1:
                raise ModelError(f"lambda must lie in (0, 1), got {lam}")
            w_snap, w_traj = 1 - lam, lam
        else:
            w_snap = w_traj = 1.0
        self.terms = {}  # unit time -> dict of snapshot / trajectory blocks

        if snapshots is not None:
            times = unit_times(snapshots.grid)
            w = w_snap / len(times)
            self.snap_times = times
            self.snap_coeffs = snapshots.coeffs
            for t, c in zip(times, snapshots.coeffs):
                norm = float(c @ self.M @ c)
                if norm <= 0:
                    raise ModelError("snapshot coefficients with zero M-norm")
                self._slot(t)["snap"].append((c, w / norm))

        if trajectories is not None:
            times = unit_times(trajectories.grid)
            C = trajectories.coeffs
            ok0 = ~np.isnan(C[:, 0, :]).any(axis=1)
            skipped = int((~ok0).sum())
            if skipped:
                logger.warning("skipping %d trajectories with an uncovered first point", skipped)
            C = C[ok0]
            K = C.shape[0]
            if K == 0 or len(times) < 2:
                raise ModelError("no usable trajectories")
            w = w_traj / (K * len(times))
            self.traj_times = times
            self.traj_coeffs = C
            for r in range(1, len(times)):
                ok = ~np.isnan(C[:, r, :]).any(axis=1)
                Cr = C[ok, r, :].T
                C0 = C[ok, 0, :].T
                norms = np.einsum("ik,ij,jk->k", Cr, self.M, Cr)
                self._slot(times[r])["traj"].append((C0, Cr, w / norms))

        self.times = sorted(self.terms)

    def _slot(self, t):
        t = float(t)
        if t not in self.terms:
            self.terms[t] = {"snap": [], "traj": []}
        return self.terms[t]

    def value(self, P, c_star=None) -> float:
        return self._evaluate(P, c_star, want_grad=False)[0]

    def value_and_grad(self, P, c_star=None):
        return self._evaluate(P, c_star, want_grad=True)

    def _evaluate(self, P, c_star, want_grad):
        P = np.asarray(P, dtype=float)
        M = self.M
        N = P.shape[0]
        loss = 0.0
        gP = np.zeros((N, N))
        gc = np.zeros(N)
        for t in self.times:
            slot = self.terms[t]
            E = expm(t * P) if t > 0 else np.eye(N)
            S0 = np.zeros((N, N))
            for c_r, w in slot["snap"]:
                resid = E @ c_star - c_r
                Mr = M @ resid
                loss += w * float(resid @ Mr)
                if want_grad:
                    S0 += 2 * w * np.outer(Mr, c_star)
                    gc += 2 * w * (E.T @ Mr)
            for C0, Cr, w in slot["traj"]:
                R = E @ C0 - Cr
                MR = M @ R
                loss += float(np.sum(w * np.einsum("ik,ik->k", R, MR)))
                if want_grad:
                    S0 += (2 * MR * w) @ C0.T
            if want_grad and t > 0 and np.any(S0):
                gP += gradient_series(P, t, S0)
        return loss, gP, gc

    def per_time_errors(self, P, c_star=None) -> dict:
        """Unsquared relative errors per time for each data role.

        Trajectory errors at each time are the root of the mean squared
        error over paths.
        """
        out = {}
        if self.has_snapshots:
            out["snapshot"] = [
                np.sqrt(relative_error(P, c_star, c, self.M, t))
                for t, c in zip(self.snap_times, self.snap_coeffs)
            ]
        if self.has_trajectories:
            errs = [0.0]
            C = self.traj_coeffs
            for r, t in enumerate(self.traj_times[1:], start=1):
                E = expm(t * np.asarray(P, dtype=float))
                ok = ~np.isnan(C[:, r, :]).any(axis=1)
                R = E @ C[ok, 0, :].T - C[ok, r, :].T
                num = np.einsum("ik,ij,jk->k", R, self.M, R)
                den = np.einsum("ik,ij,jk->k", C[ok, r, :].T, self.M, C[ok, r, :].T)
                errs.append(float(np.sqrt(np.mean(num / den))))
            out["trajectory"] = errs
        return out


def grad_loss_Q(objective: Objective, P, c_star, M, pattern) -> np.ndarray:
    """Gradient of the loss w.r.t. the pattern entries of ``Q`` (zero elsewhere)."""
    _, gP, _ = objective.value_and_grad(P, c_star)
    gQ = q_to_p(gP, M)
    return np.where(pattern, gQ, 0.0)


def evaluate_errors(model: GeneratorModel, series: CoefficientSeries, M, c_star=None) -> np.ndarray:
    """Unsquared relative errors of ``model`` on a test series.

    The initial condition is the model's ``c*`` unless overridden; models
    without one start from the test series' first coefficients.
    """
    if c_star is None:
        c_star = model.c_star if model.c_star is not None else series.coeffs[0]
    times = _model_times(model, series.grid)
    return np.array([np.sqrt(relative_error(model.P, c_star, c, M, t)) for t, c in zip(times, series.coeffs)])


def _model_times(model: GeneratorModel, grid: TimeGrid) -> np.ndarray:
    if grid.rescaled:
        return grid.times
    # same arithmetic as fitting, so training-set errors reproduce exactly
    return rescale_time_grid(TimeGrid(grid.times, span=model.time_span)).times
