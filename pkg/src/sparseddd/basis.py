"""Compact radial piecewise-linear density basis.

Each basis function is a cone

    psi_j(x) = C(d, zeta_j) * max(0, 1 - |x - x_j| / zeta_j)

with ``C(d, zeta) = d (d+1) Gamma(d/2) / (2 pi^(d/2) zeta^d)`` so that it
integrates to one over R^d.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

logger = logging.getLogger(__name__)


class BasisError(ValueError):
    pass


def cone_normalizer(d: int, zeta) -> np.ndarray:
    """Peak height of a unit-mass cone of radius ``zeta`` in ``d`` dimensions."""
    zeta = np.asarray(zeta, dtype=float)
    return d * (d + 1) * math.gamma(d / 2) / (2 * math.pi ** (d / 2) * zeta**d)


@dataclass(frozen=True)
class BasisSet:
    centers: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        centers = np.array(np.atleast_2d(self.centers), dtype=float)
        radii = np.array(self.radii, dtype=float).ravel()
        if radii.size != centers.shape[0]:
            raise BasisError("one radius per center is required")
        if np.any(radii <= 0) or not np.all(np.isfinite(radii)):
            raise BasisError("support radii must be positive and finite")
        centers.setflags(write=False)
        radii.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "radii", radii)

    @property
    def N(self) -> int:
        return self.centers.shape[0]

    @property
    def d(self) -> int:
        return self.centers.shape[1]

    @property
    def heights(self) -> np.ndarray:
        return cone_normalizer(self.d, self.radii)

    def evaluate(self, x) -> np.ndarray:
        """All basis functions at the points ``x``; returns shape ``(n, N)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.d:
            raise BasisError(f"points have dimension {x.shape[1]}, basis has {self.d}")
        r = cdist(x, self.centers)
        return self.heights * np.maximum(0.0, 1.0 - r / self.radii)

    def permuted(self, perm) -> "BasisSet":
        perm = np.asarray(perm)
        return BasisSet(self.centers[perm], self.radii[perm])

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "centers": self.centers.tolist(),
            "radii": self.radii.tolist(),
        }

    def content_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "BasisSet":
        payload = json.loads(Path(path).read_text())
        basis = cls(np.array(payload["centers"], dtype=float).reshape(-1, payload["d"]), payload["radii"])
        return basis


def kmeans_centers(points, k: int, seed: int = 0) -> np.ndarray:
    """Lloyd k-means with seeded k-means++ initialisation.

    Runs to an assignment fixpoint or 300 iterations.
    """
    from sklearn.cluster import KMeans

    points = np.atleast_2d(np.asarray(points, dtype=float))
    n_distinct = np.unique(points, axis=0).shape[0]
    if k < 1 or k > n_distinct:
        raise BasisError(f"k={k} exceeds the {n_distinct} distinct points")
    km = KMeans(n_clusters=k, init="k-means++", n_init=1, max_iter=300, tol=0.0,
                random_state=seed, algorithm="lloyd")
    km.fit(points)
    return np.array(km.cluster_centers_, dtype=float)


def select_radii(centers) -> np.ndarray:
    """Distance from each center to its second-nearest other center."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if centers.shape[0] < 3:
        raise BasisError("at least 3 centers are needed to pick two neighbours each")
    dist = cdist(centers, centers)
    np.fill_diagonal(dist, np.inf)
    if np.any(dist == 0):
        raise BasisError("duplicate basis centers")
    return np.sort(dist, axis=1)[:, 1]


def build_basis(points, k: int = 30, seed: int = 0) -> BasisSet:
    centers = kmeans_centers(points, k, seed)
    return BasisSet(centers, select_radii(centers))


def eval_basis(x, j: int, basis: BasisSet) -> float:
    """Value of basis function ``j`` at the single point ``x``."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != basis.d:
        raise BasisError(f"point has dimension {x.size}, basis has {basis.d}")
    r = float(np.linalg.norm(x - basis.centers[j]))
    zeta = basis.radii[j]
    if r >= zeta:
        return 0.0
    return float(cone_normalizer(basis.d, zeta) * (1.0 - r / zeta))


def project_coefficients(points, basis: BasisSet) -> np.ndarray:
    """Galerkin coefficients of a sample set.

    ``c_j`` is proportional to the summed density of basis ``j`` over the
    points. Points outside every support contribute nothing and are counted
    in a warning.
    """
    values = basis.evaluate(points)
    per_point = values.sum(axis=1)
    uncovered = int(np.count_nonzero(per_point == 0))
    total = per_point.sum()
    if total <= 0:
        raise BasisError("all points fall outside every basis support")
    if uncovered:
        logger.warning("%d of %d points lie outside every basis support", uncovered, len(per_point))
    c = values.sum(axis=0) / total
    return c / c.sum()


def project_points_individually(points, basis: BasisSet) -> np.ndarray:
    """Coefficients of each point on its own (delta-function data).

    Rows for points outside every support are NaN.
    """
    values = basis.evaluate(points)
    tot = values.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = values / tot
    c[tot[:, 0] == 0] = np.nan
    return c


def project_snapshots(series, basis: BasisSet):
    """Coefficient series of a :class:`~sparseddd.domain.SnapshotSeries`."""
    from .domain import CoefficientSeries

    return CoefficientSeries(series.grid, np.stack([project_coefficients(s, basis) for s in series.samples]))


def project_trajectories(trajectories, basis: BasisSet):
    """Per-path coefficients of a :class:`~sparseddd.domain.TrajectorySet`."""
    from .domain import TrajectoryCoefficients

    K, R1, d = trajectories.paths.shape
    flat = project_points_individually(trajectories.paths.reshape(-1, d), basis)
    missing = int(np.isnan(flat[:, 0]).sum())
    if missing:
        logger.warning("%d trajectory points lie outside every basis support", missing)
    return TrajectoryCoefficients(trajectories.grid, flat.reshape(K, R1, basis.N))
