"""
Cone basis functions, Galerkin coefficients and the mass matrix.

Samples from a density are summarised by coefficients c_j proportional to
the summed basis values at the samples. The mass matrix M holds the
pairwise overlap integrals; it is sparse because the supports are compact.
"""

import numpy as np

from sparseddd.basis import BasisSet, build_basis, project_coefficients, select_radii
from sparseddd.quadrature import mass_matrix, sparsity_pattern

np.set_printoptions(precision=4, suppress=True)

########################## a 1D toy basis ##########################
centers = np.array([[0.0], [1.0], [3.0]])
radii = select_radii(centers)        # distance to the second-nearest other center
print("radii:", radii)
basis = BasisSet(centers, radii)

pts = np.array([[0.5], [0.5], [2.0]])
print("coefficients:", project_coefficients(pts, basis))   # (1/3, 1/2, 1/6)

# triangle of half-width 1 and unit mass overlaps itself by 2/3
tri = BasisSet(np.array([[0.0], [10.0], [20.0]]), [1.0, 1.0, 1.0])
for L in (1_000, 10_000, 100_000):
    print(f"L={L:>7}  M_00={mass_matrix(tri, L).dense()[0, 0]:.8f}  (exact 0.66666667)")

########################## a 2D basis from k-means ##########################
rng = np.random.default_rng(0)
cloud = np.concatenate([rng.normal([1, 2], 0.4, (400, 2)), rng.normal([3, 1.5], 0.4, (400, 2))])
basis2 = build_basis(cloud, 15, seed=0)
pattern = sparsity_pattern(basis2)
M = mass_matrix(basis2, 20_000)
print(f"{basis2.N} basis functions; pattern has {pattern.sum()} of {basis2.N ** 2} entries")
print("smallest eigenvalue of M:", np.linalg.eigvalsh(M.dense()).min())
print("coefficients of the cloud:", project_coefficients(cloud, basis2))
