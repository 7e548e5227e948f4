"""Evidence lower bound and its separable MM minorizer.

Dyad ``(i, j)`` with clusters ``(k, l)`` contributes ``gamma_ik gamma_jl
c_ij,kl`` to the ELBO, where for an edge

    c_ij,kl = log p_kl + log f_kl(w_ij) - (integral f_kl - 1)

and for a non-edge ``c_ij,kl = log(1 - p_kl)``.  The density term carries
the responsibility product, as in the local-likelihood form of the ELBO.

The minorizer bounds every product ``c x y`` (``x = gamma_ik``,
``y = gamma_jl``, hats denote the current iterate) by a separable concave
quadratic that touches it at ``(x_hat, y_hat)``:

* ``c <= 0``:  ``c (x^2 y_hat / (2 x_hat) + y^2 x_hat / (2 y_hat))``
  (arithmetic-geometric mean inequality);
* ``c > 0``:   ``c (2 y_hat x + 2 x_hat y - 2 x_hat y_hat
  - x^2 y_hat / (2 x_hat) - y^2 x_hat / (2 y_hat))``
  (tangent of the convex ``(a x + y / a)^2 / 2`` with ``a^2 = y_hat / x_hat``).

The entropy uses ``-log x >= -log x_hat - x / x_hat + 1``.  Bernoulli terms
are always non-positive, so only edges whose log-density is large enough
ever take the second branch.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from ..errors import NonPositiveGammaHat
from ..network import WeightedNetwork
from .params import ModelParams, check_gamma, pair_keys

PI_FLOOR = 1e-300


@dataclass
class DyadTerms:
    """Per-dyad log-likelihood coefficients for one parameter setting."""

    log_p: np.ndarray          # (K, K)
    log_1mp: np.ndarray        # (K, K)
    edge: np.ndarray | None    # (m, K, K) edge coefficients; None in binary mode
    log_pi: np.ndarray         # (K,)

    @property
    def binary(self) -> bool:
        return self.edge is None


def edge_log_densities(net: WeightedNetwork, params: ModelParams) -> np.ndarray:
    """``(m, K, K)`` floored ``log f_kl(w_e)`` minus the normalization penalty."""
    K = params.K
    out = np.empty((net.n_edges, K, K))
    pen = params.density_penalty()
    for k, l in pair_keys(K):
        v = params.log_weight_density(k, l, net.weight) - pen[k, l]
        out[:, k, l] = v
        out[:, l, k] = v
    return out


def dyad_terms(net: WeightedNetwork, params: ModelParams) -> DyadTerms:
    s = params.theta[:, None] + params.theta[None, :]
    log_p = -np.logaddexp(0.0, -s)
    log_1mp = -np.logaddexp(0.0, s)
    edge = None
    if params.weight_mode != "none":
        edge = log_p[None] + edge_log_densities(net, params)
    log_pi = np.log(np.maximum(params.pi, PI_FLOOR))
    return DyadTerms(log_p, log_1mp, edge, log_pi)


def _pair_sums(net, G):
    """``(sum_{i!=j} g_ik g_jl, sum_{i!=j} A_ij g_ik g_jl)`` and ``A G``."""
    col = G.sum(axis=0)
    AG = net.adjacency @ G
    return np.outer(col, col) - G.T @ G, G.T @ AG, AG


def elbo(net: WeightedNetwork, gamma, params: ModelParams, terms: DyadTerms | None = None) -> float:
    """Evidence lower bound at responsibilities ``gamma``.

    Uses ``0 log 0 = 0``; weight densities are floored at 1e-12.
    """
    G = check_gamma(gamma, net.n, params.K)
    t = dyad_terms(net, params) if terms is None else terms
    all_pairs, edge_pairs, _ = _pair_sums(net, G)
    value = 0.5 * np.sum((all_pairs - edge_pairs) * t.log_1mp)
    if t.binary:
        value += 0.5 * np.sum(edge_pairs * t.log_p)
    else:
        value += np.einsum("ek,ekl,el->", G[net.src], t.edge, G[net.dst])
    value += np.sum(G * t.log_pi) - np.sum(special.xlogy(G, G))
    return float(value)


def _scatter(net, first_vals, second_vals):
    """Sum per-edge rows onto their endpoints."""
    first, second = net.incidence
    return first @ first_vals + second @ second_vals


def surrogate_coefficients(net: WeightedNetwork, gamma_hat, params: ModelParams,
                           terms: DyadTerms | None = None):
    """Per-node quadratic coefficients of the minorizer at ``gamma_hat``.

    Returns ``(a, b, const)`` with ``Q(gamma) = sum(a gamma^2 + b gamma) +
    const``; every ``a`` is strictly negative.
    """
    Gh = check_gamma(gamma_hat, net.n, params.K)
    if np.any(Gh <= 0):
        raise NonPositiveGammaHat("gamma_hat must be strictly positive; clamp it first")
    t = dyad_terms(net, params) if terms is None else terms
    col = Gh.sum(axis=0)
    AG = net.adjacency @ Gh
    non_nbr = col[None, :] - Gh - AG
    abs_sum = non_nbr @ (-t.log_1mp)
    if t.binary:
        abs_sum += AG @ (-t.log_p)
        pos_sum = np.zeros_like(Gh)
        const = 0.0
    else:
        Gs, Gd = Gh[net.src], Gh[net.dst]
        C = t.edge
        Cabs = np.abs(C)
        Cpos = np.maximum(C, 0.0)
        abs_sum += _scatter(net, np.einsum("ekl,el->ek", Cabs, Gd), np.einsum("ekl,ek->el", Cabs, Gs))
        pos_sum = _scatter(net, np.einsum("ekl,el->ek", Cpos, Gd), np.einsum("ekl,ek->el", Cpos, Gs))
        const = -2.0 * float(np.einsum("ek,ekl,el->", Gs, Cpos, Gd))
    a = -abs_sum / (2.0 * Gh) - 1.0 / Gh
    b = 2.0 * pos_sum + t.log_pi[None, :] - np.log(Gh) + 1.0
    return a, b, const


def surrogate_q(net: WeightedNetwork, gamma_hat, gamma, params: ModelParams,
                terms: DyadTerms | None = None) -> float:
    """Minorizer ``Q(gamma; gamma_hat)`` of the ELBO in ``gamma``."""
    G = check_gamma(gamma, net.n, params.K)
    a, b, const = surrogate_coefficients(net, gamma_hat, params, terms)
    return float(np.sum(a * G * G + b * G) + const)
