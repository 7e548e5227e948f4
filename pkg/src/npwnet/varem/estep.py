"""MM sweeps over the responsibilities."""
from __future__ import annotations

import numpy as np

from ..network import WeightedNetwork
from .objective import dyad_terms, elbo, surrogate_coefficients
from .params import GAMMA_EPS, ModelParams, check_gamma, clamp_gamma
from .qp import solve_qp_batch


def e_step(net: WeightedNetwork, gamma_prev, params: ModelParams, inner_iters: int = 5,
           eps: float = GAMMA_EPS) -> np.ndarray:
    """Run ``inner_iters`` minorize-maximize sweeps from ``gamma_prev``.

    Each sweep freezes the current responsibilities, builds the separable
    quadratic minorizer and maximizes every node's row independently.  Rows
    are optimized over the shrunken simplex ``{g : g_k >= eps, sum g = 1}``
    (substituting ``g = eps + (1 - K eps) u``), so the iterate stays strictly
    positive without any clamping after the solve and each sweep can only
    raise the ELBO.  A sweep that nevertheless lowers it through rounding is
    discarded and the sweeps stop.
    """
    K = params.K
    G = check_gamma(gamma_prev, net.n, K)
    if K == 1:
        return np.ones((net.n, 1))
    G = clamp_gamma(G, eps)
    terms = dyad_terms(net, params)
    scale = 1.0 - K * eps
    current = elbo(net, G, params, terms)
    for _ in range(int(inner_iters)):
        a, b, _ = surrogate_coefficients(net, G, params, terms)
        u = solve_qp_batch(a * scale * scale, scale * (b + 2.0 * a * eps))
        G_new = eps + scale * u
        G_new /= G_new.sum(axis=1, keepdims=True)
        value = elbo(net, G_new, params, terms)
        if value < current:
            break
        improved = value - current
        G, current = G_new, value
        if improved <= 1e-12 * max(1.0, abs(current)):
            break
    return G
