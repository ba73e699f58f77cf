"""
Generator matrices and what e^{tP} does to a probability vector.

A generator has non-negative off-diagonals and columns that sum to zero.
Its exponential is column-stochastic, so it carries coefficient vectors on
the simplex to coefficient vectors on the simplex.
"""

import numpy as np

from sparseddd.expmat import expm, expm_action
from sparseddd.model import project_generator

np.set_printoptions(precision=4, suppress=True)

########################## a three-state generator ##########################
P = np.array([[-1.0, 0.5, 0.2],
              [0.6, -0.9, 0.3],
              [0.4, 0.4, -0.5]])
print("column sums:", P.sum(axis=0))

c0 = np.array([0.7, 0.2, 0.1])
for t in (0.0, 0.5, 1.0, 5.0, 50.0):
    c = expm_action(P, c0, t)
    print(f"t={t:5.1f}  c={c}  sum={c.sum():.12f}")

# long times approach the stationary vector: the null space of P
w, v = np.linalg.eig(P)
stat = np.real(v[:, np.argmin(np.abs(w))])
print("stationary:", stat / stat.sum())

########################## column-stochastic exponential ##########################
E = expm(0.3 * P)
print("e^{0.3P} =\n", E)
print("min entry", E.min(), "column sums", E.sum(axis=0))

########################## projecting an arbitrary matrix ##########################
# negative off-diagonals are clamped and diagonals rebalance the columns
raw = np.array([[0.0, -1.0], [2.0, 0.0]])
print("projected:\n", project_generator(raw))
