"""Matrix exponential kernels and the relative-error gradients.

The gradient of ``eps^2 = |e^{tP} c* - c_r|_M^2 / |c_r|_M^2`` with respect
to ``P`` is the series

    2 / (c_r' M c_r) * sum_k t^{k+1} / (k+1)! * S_k

where ``S_k`` obeys the three-term recursion

    S_k = P' S_{k-1} + S_{k-1} P' - P' S_{k-2} P',
    S_{-1} = 0,  S_0 = M (e^{tP} c* - c_r) c*'.

When ``|tP|`` is large the series cancels catastrophically, so it is
summed for ``tP / 2^s`` and the result is doubled back up ``s`` times with
``L(2X, E) = L(X, E/2) e^X + e^X L(X, E/2)``. For ``|tP|_1 <= 1`` no
scaling happens and the plain recursion is used.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg

SERIES_RTOL = 1e-14
SERIES_KMAX = 200


class SeriesNotConverged(ArithmeticError):
    """The gradient series did not meet its tolerance within ``k_max`` terms."""

    def __init__(self, k_max, partial_norm, term_norm):
        super().__init__(
            f"gradient series not converged after {k_max} terms "
            f"(partial sum norm {partial_norm:.3e}, last term {term_norm:.3e})"
        )
        self.partial_norm = partial_norm
        self.term_norm = term_norm


def expm(A) -> np.ndarray:
    """Matrix exponential (Pade scaling and squaring)."""
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix exponential of a matrix with non-finite entries")
    return scipy.linalg.expm(A)


def expm_action(P, c, t: float) -> np.ndarray:
    """``e^{tP} c``."""
    if t < 0:
        raise ValueError("negative time")
    c = np.asarray(c, dtype=float)
    if t == 0:
        return c.copy()
    return expm(t * np.asarray(P, dtype=float)) @ c


def recursion_series(A, S0, rtol=SERIES_RTOL, k_max=SERIES_KMAX) -> np.ndarray:
    """``sum_k S_k / (k+1)!`` with ``S_k`` generated from ``A = tP'``.

    Equivalently the Frechet derivative of the exponential at ``A`` in the
    direction ``S0``. Raises :class:`SeriesNotConverged` past ``k_max``.
    """
    S0 = np.asarray(S0, dtype=float)
    total = S0.copy()
    total_norm = np.linalg.norm(total)
    if total_norm == 0.0:
        return total
    prev2 = np.zeros_like(S0)
    prev = S0
    scale = 1.0
    term_norm = total_norm
    for k in range(1, k_max + 1):
        cur = A @ prev + prev @ A - A @ prev2 @ A
        scale /= k + 1
        term = scale * cur
        total += term
        term_norm = np.linalg.norm(term)
        total_norm = np.linalg.norm(total)
        if term_norm <= rtol * total_norm:
            return total
        prev2, prev = prev, cur
    raise SeriesNotConverged(k_max, total_norm, term_norm)


def gradient_series(P, t: float, S0, rtol=SERIES_RTOL, k_max=SERIES_KMAX) -> np.ndarray:
    """``sum_k t^{k+1}/(k+1)! S_k`` for the recursion seeded with ``S0``."""
    P = np.asarray(P, dtype=float)
    S0 = np.asarray(S0, dtype=float)
    if t == 0:
        return np.zeros_like(S0)
    A = t * P.T
    norm = np.linalg.norm(A, 1)
    s = max(0, math.ceil(math.log2(norm))) if norm > 1 else 0
    A_scaled = A / 2.0**s
    L = recursion_series(A_scaled, S0 / 2.0**s, rtol, k_max)
    if s:
        F = expm(A_scaled)
        for _ in range(s):
            L = L @ F + F @ L
            F = F @ F
    return t * L


def grad_relerr_P(P, c_star, c_r, M, t_r: float) -> np.ndarray:
    """Gradient of the squared relative error at time ``t_r`` w.r.t. ``P``."""
    P = np.asarray(P, dtype=float)
    c_star = np.asarray(c_star, dtype=float)
    c_r = np.asarray(c_r, dtype=float)
    M = _dense(M)
    resid = expm_action(P, c_star, t_r) - c_r
    S0 = np.outer(M @ resid, c_star)
    return (2.0 / (c_r @ M @ c_r)) * gradient_series(P, t_r, S0)


def grad_relerr_cstar(P, c_star, c_r, M, t_r: float) -> np.ndarray:
    """Gradient of the squared relative error at time ``t_r`` w.r.t. ``c*``."""
    M = _dense(M)
    c_r = np.asarray(c_r, dtype=float)
    E = expm(t_r * np.asarray(P, dtype=float))
    resid = E @ np.asarray(c_star, dtype=float) - c_r
    return (2.0 / (c_r @ M @ c_r)) * (E.T @ (M @ resid))


def _dense(M) -> np.ndarray:
    if hasattr(M, "dense"):
        return M.dense()
    if hasattr(M, "toarray"):
        return M.toarray()
    return np.asarray(M, dtype=float)
