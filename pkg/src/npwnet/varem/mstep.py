"""Parameter updates given responsibilities."""
from __future__ import annotations

import warnings

import numpy as np
from scipy import linalg, special

from ..errors import (DegenerateSample, EmptyBlockWarning, InvalidConfig, NonFiniteTheta,
                      SaturationWarning)
from ..locdens import (KernelSpec, WeightedSample, bandwidth_for_degree, fit_local_density,
                       make_grid)
from ..network import WeightedNetwork
from .params import FitConfig, check_gamma, pair_keys

THETA_CAP = 15.0
MASS_EPS = 1e-8


def m_step_pi(gamma) -> np.ndarray:
    g = np.asarray(gamma, dtype=float)
    pi = g.sum(axis=0) / g.shape[0]
    return pi / pi.sum()


# ---------------------------------------------------------------------------
# sparsity parameters

def dyad_counts(net: WeightedNetwork, gamma):
    """Expected edge and total dyad counts per ordered block pair.

    Returns ``(N1, T)`` with ``N1[k, l] = 1/2 sum_{i != j} A_ij g_ik g_jl`` and
    ``T[k, l] = 1/2 sum_{i != j} g_ik g_jl``; both are symmetric.
    """
    G = np.asarray(gamma, dtype=float)
    col = G.sum(axis=0)
    T = 0.5 * (np.outer(col, col) - G.T @ G)
    N1 = 0.5 * (G.T @ (net.adjacency @ G))
    return N1, T


def bernoulli_part(theta, N1, T) -> float:
    s = theta[:, None] + theta[None, :]
    N0 = T - N1
    return float(-np.sum(N1 * np.logaddexp(0.0, -s)) - np.sum(N0 * np.logaddexp(0.0, s)))


def bernoulli_grad_hess(theta, N1, T):
    s = theta[:, None] + theta[None, :]
    sig = special.expit(s)
    R = N1 - T * sig
    grad = 2.0 * R.sum(axis=1)
    H = T * sig * (1.0 - sig)
    hess = -2.0 * (np.diag(H.sum(axis=1)) + H)
    return grad, hess


def m_step_theta(net: WeightedNetwork, gamma, theta_init, max_iter: int = 100,
                 tol: float = 1e-8, cap: float = THETA_CAP) -> np.ndarray:
    """Ascend the Bernoulli part of the ELBO in ``theta``.

    Damped Newton with Armijo backtracking; iterates are projected onto
    ``|theta_k| <= cap`` and a :class:`SaturationWarning` is issued when the
    cap binds.  The returned value never lowers the objective relative to
    ``theta_init``.
    """
    G = np.asarray(gamma, dtype=float)
    theta = np.clip(np.asarray(theta_init, dtype=float).copy(), -cap, cap)
    K = theta.size
    if G.shape != (net.n, K):
        raise InvalidConfig(f"gamma shape {G.shape} does not match K={K}")
    N1, T = dyad_counts(net, G)
    # separation: a cluster whose dyads are all edges (or all non-edges) has
    # an infinite maximizer, so it goes straight to the cap
    tot = T.sum(axis=1)
    full = N1.sum(axis=1) >= tot * (1.0 - 1e-12)
    empty = N1.sum(axis=1) <= tot * 1e-12
    theta[full] = cap
    theta[empty & ~full] = -cap
    pinned = full | empty
    f = bernoulli_part(theta, N1, T)
    for _ in range(max_iter):
        grad, hess = bernoulli_grad_hess(theta, N1, T)
        if not np.all(np.isfinite(grad)):
            raise NonFiniteTheta("non-finite gradient in the sparsity update")
        # coordinates pinned at the cap and pushing outward are done
        free = ~(pinned | (theta >= cap) & (grad > 0) | (theta <= -cap) & (grad < 0))
        if not free.any() or np.linalg.norm(grad[free]) <= tol:
            break
        neg = -hess[np.ix_(free, free)]
        tau = 1e-6
        while True:
            try:
                chol = linalg.cho_factor(neg + tau * np.eye(neg.shape[0]))
                break
            except linalg.LinAlgError:
                tau *= 2.0
                if tau > 1e12:
                    raise NonFiniteTheta("could not damp the Hessian") from None
        step = np.zeros(K)
        step[free] = linalg.cho_solve(chol, grad[free])
        t = 1.0
        accepted = False
        for _ in range(60):
            cand = np.clip(theta + t * step, -cap, cap)
            fc = bernoulli_part(cand, N1, T)
            # projected Armijo condition
            if np.isfinite(fc) and fc >= f + 1e-4 * float(grad @ (cand - theta)):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        moved = np.max(np.abs(cand - theta))
        theta, f = cand, fc
        if moved == 0.0:
            break
    if not np.all(np.isfinite(theta)):
        raise NonFiniteTheta("sparsity parameters diverged")
    if np.any(np.abs(theta) >= cap):
        warnings.warn(f"sparsity parameter reached the cap |theta| = {cap}", SaturationWarning,
                      stacklevel=2)
    return theta


# ---------------------------------------------------------------------------
# weight distributions

def block_masses(net: WeightedNetwork, gamma) -> dict:
    """Per-edge responsibility mass of every unordered block pair."""
    G = np.asarray(gamma, dtype=float)
    Gs, Gd = G[net.src], G[net.dst]
    out = {}
    for k, l in pair_keys(G.shape[1]):
        if k == l:
            out[(k, l)] = Gs[:, k] * Gd[:, k]
        else:
            out[(k, l)] = Gs[:, k] * Gd[:, l] + Gs[:, l] * Gd[:, k]
    return out


def _kernel_for(sample: WeightedSample, degree, truncation):
    try:
        h = bandwidth_for_degree(sample, degree)
    except DegenerateSample:
        v = sample.values[sample.masses > 0]
        h = max(abs(float(v.mean())), 1.0) * 1e-2 if v.size else 1e-2
    return KernelSpec(h, truncation)


def pooled_density(net: WeightedNetwork, config: FitConfig):
    """Density of all edge weights with unit masses, on the shared grid."""
    w = net.weight
    sample = WeightedSample(w, np.ones_like(w))
    kernel = _kernel_for(sample, config.degree, config.truncation)
    grid = make_grid(w, kernel.bandwidth, config.grid_size)
    return fit_local_density(sample, grid, kernel, config.degree), grid


def _weighted_moments(w, m):
    M = m.sum()
    mean = float(np.dot(m, w) / M)
    var = float(np.dot(m, (w - mean) ** 2) / M)
    return mean, var


def m_step_weights(net: WeightedNetwork, gamma, config: FitConfig, with_flags: bool = False,
                   pooled=None):
    """Refit every block pair's weight distribution.

    Nonparametric mode returns a ``{(k, l): DensityEstimate}`` table, the
    parametric modes a symmetric ``(K, K, 2)`` array and binary mode ``None``.
    Pairs whose total mass is below 1e-8, or whose weighted sample is
    degenerate, receive the pooled all-edge estimate and trigger an
    :class:`EmptyBlockWarning`.  With ``with_flags=True`` the list of such
    pairs is returned as a second value.  ``pooled`` may carry a cached
    result of :func:`pooled_density` for the same network and config.
    """
    mode = config.weight_mode
    K = config.K
    G = check_gamma(gamma, net.n, K)
    if mode == "none":
        return (None, []) if with_flags else None
    if net.n_edges == 0:
        raise DegenerateSample("weight distributions need at least one edge")
    # one sort shared by every block pair's sample
    order = np.argsort(net.weight, kind="stable")
    w = net.weight[order]
    masses = {key: m[order] for key, m in block_masses(net, G).items()}
    flagged = []
    if mode == "nonparametric":
        pooled, grid = pooled_density(net, config) if pooled is None else pooled
        table = {}
        for key, m in masses.items():
            if m.sum() < MASS_EPS:
                flagged.append(key)
                table[key] = pooled
                continue
            sample = WeightedSample(w, m)
            try:
                kernel = KernelSpec(bandwidth_for_degree(sample, config.degree), config.truncation)
            except DegenerateSample:
                flagged.append(key)
                table[key] = pooled
                continue
            table[key] = fit_local_density(sample, grid, kernel, config.degree)
    else:
        if mode == "gamma" and np.any(w <= 0):
            raise InvalidConfig("gamma weight mode needs strictly positive weights")
        ones = np.ones_like(w)
        p_mean, p_var = _weighted_moments(w, ones)
        table = np.empty((K, K, 2))
        for key, m in masses.items():
            mean, var = (p_mean, p_var)
            if m.sum() >= MASS_EPS:
                mean, var = _weighted_moments(w, m)
            else:
                flagged.append(key)
            if not var > 1e-12 * max(1.0, mean * mean):
                if key not in flagged:
                    flagged.append(key)
                mean, var = p_mean, p_var
            var = max(var, 1e-12 * max(1.0, mean * mean))
            if mode == "normal":
                pair = (mean, np.sqrt(var))
            else:
                pair = (mean * mean / var, mean / var)
            k, l = key
            table[k, l] = table[l, k] = pair
    if flagged:
        warnings.warn(f"block pairs {flagged} carry no usable mass; pooled estimate used",
                      EmptyBlockWarning, stacklevel=2)
    return (table, flagged) if with_flags else table
