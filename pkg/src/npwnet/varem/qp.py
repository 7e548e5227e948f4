"""Maximize a separable concave quadratic over the probability simplex.

The objective for one row is ``sum_k a_k x_k**2 + b_k x_k`` with ``a_k <= 0``.
Stationarity gives ``2 a_k x_k + b_k = lam`` on the support, so for
``a_k < 0`` the solution is ``x_k(lam) = clip((lam - b_k) / (2 a_k), 0, 1)``,
a non-increasing function of the multiplier ``lam``.  Bisection locates the
``lam`` with ``sum_k x_k(lam) = 1``; the multiplier is then recomputed in closed
form on the detected support.
"""
from __future__ import annotations

import numpy as np

from ..errors import InfeasibleCoefficients

_BISECT_ITERS = 100


def _clip_solution(lam, a, b):
    return np.clip((lam[..., None] - b) / (2.0 * a), 0.0, 1.0)


def solve_qp_batch(a, b) -> np.ndarray:
    """Row-wise simplex maximizer for strictly negative ``a``.

    Parameters
    ----------
    a, b : ndarray, shape (n, K)
        Quadratic and linear coefficients; every ``a`` must be < 0.

    Returns
    -------
    ndarray, shape (n, K)
        Rows sum to one within 1e-12.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 2:
        raise InfeasibleCoefficients("a and b must be matching (n, K) arrays")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InfeasibleCoefficients("QP coefficients must be finite")
    if np.any(a >= 0):
        raise InfeasibleCoefficients("batched solver needs strictly negative a")
    n, K = a.shape
    if K == 1:
        return np.ones((n, 1))
    # at lo every coordinate is >= 1, at hi every coordinate is 0
    lo = np.min(b + 2.0 * a, axis=1)
    hi = np.max(b, axis=1)
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        above = _clip_solution(mid, a, b).sum(axis=1) > 1.0
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
        if np.all(hi - lo <= 1e-15 * np.maximum(1.0, np.abs(hi))):
            break
    lam = 0.5 * (lo + hi)
    x = _clip_solution(lam, a, b)
    # exact multiplier on the support (interior coordinates)
    support = x > 0
    inv = np.where(support, 1.0 / (2.0 * a), 0.0)
    denom = inv.sum(axis=1)
    lam_exact = (1.0 + np.sum(b * inv, axis=1)) / denom
    refined = np.where(support, (lam_exact[:, None] - b) * inv, 0.0)
    ok = np.all(refined >= 0, axis=1) & np.all(refined <= 1, axis=1)
    x = np.where(ok[:, None], refined, x)
    x = np.maximum(x, 0.0)
    return x / x.sum(axis=1, keepdims=True)


def solve_node_qp(a, b) -> np.ndarray:
    """Maximizer of ``sum_k a_k x_k^2 + b_k x_k`` over the simplex.

    Zero quadratic coefficients are allowed.  Linear coordinates (``a_k = 0``)
    can only carry mass at the largest of their ``b`` values; when the
    strictly concave coordinates already fill the simplex at that multiplier,
    the remainder goes to the lowest-index linear coordinate attaining it.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape or a.size == 0:
        raise InfeasibleCoefficients("a and b must be non-empty vectors of equal length")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InfeasibleCoefficients("QP coefficients must be finite")
    if np.any(a > 0):
        raise InfeasibleCoefficients("quadratic coefficients must be non-positive")
    K = a.size
    flat = a == 0
    if not flat.any():
        return solve_qp_batch(a[None], b[None])[0]
    curved = ~flat
    b_flat = b[flat].max()
    x = np.zeros(K)
    if curved.any():
        ac, bc = a[curved], b[curved]
        at_flat = np.clip((b_flat - bc) / (2.0 * ac), 0.0, 1.0)
        if at_flat.sum() > 1.0:
            # the concave part alone exceeds unit mass, so lam > b_flat and
            # the linear coordinates stay at zero
            x[curved] = solve_qp_batch(ac[None], bc[None])[0]
            return x
        x[curved] = at_flat
    k_star = int(np.flatnonzero(flat & (b == b_flat))[0])
    x[k_star] = 1.0 - x.sum()
    return x
