"""Bistable-potential SDE benchmark.

Particles start near (1/2, 1/2), drift along the valleys y = 2x and
y = x/2, and settle in the wells at (2, 4) and (4, 2):

    dX = -grad V(X) dt + sqrt(2 D) dW

on the positive quadrant with reflecting walls on both axes.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .domain import Dataset, TimeGrid, TrajectorySet

logger = logging.getLogger(__name__)

PAPER_TIMES = (0, 1, 2, 3, 5, 8, 13, 21, 34, 55, 89)

# Coefficient of |x|^2 subtracted inside the quartic valley term. 3/10 puts
# the valley floor exactly on y = 2x and y = x/2.
VALLEY_COEFFICIENT = 0.3

_WELLS = (
    (0.5, np.array([0.5, 0.5]), 0.5),  # (depth, centre, exponent scale)
    (1.0, np.array([4.0, 2.0]), 1.0),
    (1.0, np.array([2.0, 4.0]), 1.0),
)


def _valley(x, a):
    x1, x2 = x[..., 0], x[..., 1]
    n2 = x1 * x1 + x2 * x2
    return 0.5 * (n2 - x1 * x2) - a * n2


def potential(x, valley_coefficient: float = VALLEY_COEFFICIENT):
    """Potential energy at ``x`` (shape ``(..., 2)``)."""
    x = np.asarray(x, dtype=float)
    v = _valley(x, valley_coefficient) ** 2
    for depth, centre, scale in _WELLS:
        v = v - depth * np.exp(-scale * ((x - centre) ** 2).sum(axis=-1))
    return v


def potential_gradient(x, valley_coefficient: float = VALLEY_COEFFICIENT):
    """Closed-form gradient of :func:`potential`."""
    x = np.asarray(x, dtype=float)
    a = valley_coefficient
    x1, x2 = x[..., 0], x[..., 1]
    q = _valley(x, a)
    g = np.empty(x.shape)
    g[..., 0] = 2 * q * (x1 - 0.5 * x2 - 2 * a * x1)
    g[..., 1] = 2 * q * (x2 - 0.5 * x1 - 2 * a * x2)
    for depth, centre, scale in _WELLS:
        diff = x - centre
        e = depth * np.exp(-scale * (diff**2).sum(axis=-1))
        g += (2 * scale * e)[..., None] * diff
    return g


@dataclass(frozen=True)
class SdeConfig:
    D: float = 0.25
    dt: float = 2.0**-9
    init_mean: tuple = (0.5, 0.5)
    init_cov_diag: tuple = (0.5, 0.5)
    observation_times: tuple = PAPER_TIMES
    n_paths: int = 1000
    seed: int = 0
    valley_coefficient: float = VALLEY_COEFFICIENT
    chunk_steps: int = field(default=2048, compare=False)

    def __post_init__(self):
        if self.D < 0 or self.dt <= 0:
            raise ValueError("need D >= 0 and dt > 0")
        t = np.asarray(self.observation_times, dtype=float)
        if np.any(t < 0) or np.any(np.diff(t) <= 0):
            raise ValueError("observation times must be non-negative and increasing")

    def to_dict(self) -> dict:
        return {
            "D": self.D,
            "dt": self.dt,
            "init_mean": list(self.init_mean),
            "init_cov_diag": list(self.init_cov_diag),
            "observation_times": list(self.observation_times),
            "n_paths": self.n_paths,
            "seed": self.seed,
            "valley_coefficient": self.valley_coefficient,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SdeConfig":
        payload = dict(payload)
        for key in ("init_mean", "init_cov_diag", "observation_times"):
            if key in payload:
                payload[key] = tuple(payload[key])
        return cls(**payload)


def _observation_steps(cfg: SdeConfig) -> np.ndarray:
    raw = np.asarray(cfg.observation_times, dtype=float) / cfg.dt
    steps = np.rint(raw).astype(np.int64)
    if np.any(np.abs(raw - steps) > 1e-9):
        warnings.warn("observation times snapped to the nearest Euler-Maruyama step")
    return steps


def path_generator(seed: int, index: int) -> np.random.Generator:
    """Independent stream for path ``index`` (order of generation irrelevant)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def simulate_paths(cfg: SdeConfig) -> TrajectorySet:
    """Euler-Maruyama with coordinate-wise reflection ``x <- |x|``."""
    steps = _observation_steps(cfg)
    K, d = cfg.n_paths, len(cfg.init_mean)
    gens = [path_generator(cfg.seed, k) for k in range(K)]
    z0 = np.stack([g.standard_normal(d) for g in gens]) if K else np.zeros((0, d))
    x = np.abs(np.asarray(cfg.init_mean) + np.sqrt(np.asarray(cfg.init_cov_diag)) * z0)

    out = np.empty((K, len(steps), d))
    sigma = math.sqrt(2 * cfg.D * cfg.dt)
    obs = {int(s): r for r, s in enumerate(steps)}
    if 0 in obs:
        out[:, obs[0]] = x
    total = int(steps[-1])
    step = 0
    while step < total:
        n = min(cfg.chunk_steps, total - step)
        noise = np.stack([g.standard_normal((n, d)) for g in gens], axis=1) * sigma
        for i in range(n):
            x = np.abs(x - potential_gradient(x, cfg.valley_coefficient) * cfg.dt + noise[i])
            step += 1
            r = obs.get(step)
            if r is not None:
                out[:, r] = x
    grid = TimeGrid(np.asarray(cfg.observation_times, dtype=float))
    return TrajectorySet(grid, out)


DATASET_ROLES = ("trajectory", "full-snapshot", "two-snapshot", "integrated")


def build_datasets(parent: TrajectorySet, seed: int = 0, n_trajectories: int = 100,
                   n_integrated: int = 10, two_snapshot_indices=(0, 3)) -> dict:
    """The four benchmark datasets, all subsets of ``parent``.

    * trajectory: ``n_trajectories`` random paths, pairing kept
    * full-snapshot: every path, pairing discarded
    * two-snapshot: full population at the first and fourth grid times
    * integrated: two-snapshot plus ``n_integrated`` of the trajectory paths
    """
    if parent.K < n_trajectories or len(parent.grid) <= max(two_snapshot_indices):
        raise ValueError(
            f"parent has {parent.K} paths and {len(parent.grid)} times; "
            f"need {n_trajectories} paths and index {max(two_snapshot_indices)}"
        )
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(1,))))
    chosen = np.sort(rng.choice(parent.K, size=n_trajectories, replace=False))
    integrated_idx = np.sort(rng.choice(chosen, size=n_integrated, replace=False))

    trajectory = parent.subset(chosen)
    full = parent.to_snapshots()
    two = parent.to_snapshots(two_snapshot_indices)
    return {
        "trajectory": Dataset("trajectory", trajectories=trajectory),
        "full-snapshot": Dataset("full-snapshot", snapshots=full),
        "two-snapshot": Dataset("two-snapshot", snapshots=two),
        "integrated": Dataset("integrated", snapshots=two, trajectories=parent.subset(integrated_idx)),
    }
