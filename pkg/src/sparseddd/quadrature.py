"""Halton quasi-Monte-Carlo quadrature and mass-matrix assembly."""

from __future__ import annotations

import hashlib
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse

from .basis import BasisSet

logger = logging.getLogger(__name__)

_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53)


def radical_inverse(index, base: int) -> np.ndarray:
    """Van der Corput radical inverse of non-negative integer(s) ``index``."""
    n = np.array(index, dtype=np.int64, copy=True)
    out = np.zeros(n.shape, dtype=float)
    scale = 1.0 / base
    while np.any(n > 0):
        out += (n % base) * scale
        n //= base
        scale /= base
    return out


def halton_point(index: int, d: int) -> np.ndarray:
    """The ``index``-th (1-based) Halton point in [0, 1)^d."""
    if index < 1:
        raise ValueError("Halton index must be >= 1")
    return np.array([radical_inverse(index, _PRIMES[k]) for k in range(d)], dtype=float)


def halton_sequence(n: int, d: int, start: int = 1) -> np.ndarray:
    """Halton points ``start, ..., start + n - 1`` as an ``(n, d)`` array."""
    if d > len(_PRIMES):
        raise ValueError(f"Halton sequence supports up to d={len(_PRIMES)}")
    idx = np.arange(start, start + n, dtype=np.int64)
    return np.stack([radical_inverse(idx, _PRIMES[k]) for k in range(d)], axis=1)


def sparsity_pattern(basis: BasisSet) -> np.ndarray:
    """Boolean ``N x N`` mask of overlapping supports (diagonal included)."""
    diff = basis.centers[:, None, :] - basis.centers[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=-1))
    pattern = dist < basis.radii[:, None] + basis.radii[None, :]
    np.fill_diagonal(pattern, True)
    return pattern


@dataclass(frozen=True)
class MassMatrix:
    """Symmetric Gram matrix of the basis with its sparsity pattern.

    A Cholesky factor is computed on construction and reused by
    :meth:`solve`.
    """

    values: scipy.sparse.csr_matrix
    pattern: np.ndarray
    node_count: int
    jitter: float = 0.0
    _chol: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        dense = self.dense()
        try:
            chol = scipy.linalg.cho_factor(dense, lower=True)
            jitter = 0.0
        except np.linalg.LinAlgError:
            n = dense.shape[0]
            jitter = 1e-12 * np.trace(dense) / n
            warnings.warn(f"mass matrix not positive definite; adding jitter {jitter:.3g}")
            try:
                chol = scipy.linalg.cho_factor(dense + jitter * np.eye(n), lower=True)
            except np.linalg.LinAlgError as exc:
                raise np.linalg.LinAlgError("mass matrix is singular") from exc
        object.__setattr__(self, "_chol", chol)
        object.__setattr__(self, "jitter", jitter)

    @property
    def N(self) -> int:
        return self.pattern.shape[0]

    def dense(self) -> np.ndarray:
        return np.asarray(self.values.todense())

    def solve(self, rhs) -> np.ndarray:
        """``M^{-1} rhs`` via the cached factorisation."""
        return scipy.linalg.cho_solve(self._chol, np.asarray(rhs, dtype=float))

    def inverse(self) -> np.ndarray:
        return self.solve(np.eye(self.N))

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.dense().tobytes())
        h.update(str(self.node_count).encode())
        return h.hexdigest()


def pair_integral(basis: BasisSet, i: int, j: int, nodes: np.ndarray) -> float:
    """QMC estimate of the overlap integral of basis functions ``i`` and ``j``.

    ``nodes`` are unit-cube points; they are mapped into the bounding box of
    the union of both supports.
    """
    ci, cj = basis.centers[i], basis.centers[j]
    zi, zj = basis.radii[i], basis.radii[j]
    lo = np.minimum(ci - zi, cj - zj)
    hi = np.maximum(ci + zi, cj + zj)
    x = lo + nodes * (hi - lo)
    hi_i, hi_j = basis.heights[i], basis.heights[j]
    ri = np.sqrt(((x - ci) ** 2).sum(axis=1))
    fi = np.maximum(0.0, 1.0 - ri / zi)
    if i == j:
        prod = fi * fi
    else:
        rj = np.sqrt(((x - cj) ** 2).sum(axis=1))
        prod = fi * np.maximum(0.0, 1.0 - rj / zj)
    volume = float(np.prod(hi - lo))
    return volume * hi_i * hi_j * prod.mean()


def mass_matrix(basis: BasisSet, nodes: int = 100_000) -> MassMatrix:
    """Assemble ``M_ij = int psi_i psi_j dx`` over overlapping pairs."""
    if nodes < 1000:
        raise ValueError("at least 1000 quadrature nodes are required")
    pattern = sparsity_pattern(basis)
    unit = halton_sequence(nodes, basis.d)
    rows, cols, vals = [], [], []
    for i, j in zip(*np.nonzero(np.triu(pattern))):
        v = pair_integral(basis, int(i), int(j), unit)
        rows.append(i)
        cols.append(j)
        vals.append(v)
        if i != j:
            rows.append(j)
            cols.append(i)
            vals.append(v)
    values = scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(basis.N, basis.N))
    return MassMatrix(values, pattern, nodes)


def cached_mass_matrix(basis: BasisSet, nodes: int, cache_dir) -> MassMatrix:
    """Load ``M`` from ``cache_dir`` if present, keyed by basis hash and node count."""
    cache_dir = Path(cache_dir)
    key = hashlib.sha256(f"{basis.content_hash()}:{nodes}".encode()).hexdigest()[:16]
    path = cache_dir / f"mass-{key}.npz"
    if path.exists():
        data = np.load(path)
        values = scipy.sparse.csr_matrix(data["values"])
        return MassMatrix(values, data["pattern"], int(data["nodes"]))
    mm = mass_matrix(basis, nodes)
    cache_dir.mkdir(parents=True, exist_ok=True)
    np.savez(path, values=mm.dense(), pattern=mm.pattern, nodes=nodes)
    return mm


def mass_matrix_from_dense(dense, pattern=None, node_count: int = 0) -> MassMatrix:
    """Wrap an explicit symmetric matrix (tests and synthetic problems)."""
    dense = np.asarray(dense, dtype=float)
    if pattern is None:
        pattern = dense != 0
        np.fill_diagonal(pattern, True)
    return MassMatrix(scipy.sparse.csr_matrix(dense), np.asarray(pattern, dtype=bool), node_count)
