"""Marginal log-likelihood by brute-force enumeration of memberships."""
from __future__ import annotations

import numpy as np
from scipy import special

from ..errors import TooLargeToEnumerate
from ..network import WeightedNetwork
from .objective import dyad_terms
from .params import ModelParams

MAX_ASSIGNMENTS = 10 ** 6
_CHUNK = 1 << 14


def exact_loglik_small(net: WeightedNetwork, params: ModelParams) -> float:
    """``log sum_z P(Y | z) P(z)`` over all ``K**n`` label vectors.

    Uses the same floored dyad terms as :func:`~npwnet.varem.elbo`, so the
    ELBO at any feasible responsibilities is a lower bound of this value.
    """
    n, K = net.n, params.K
    if K ** n > MAX_ASSIGNMENTS:
        raise TooLargeToEnumerate(f"K**n = {K}**{n} exceeds {MAX_ASSIGNMENTS}")
    t = dyad_terms(net, params)
    iu, ju = np.triu_indices(n, k=1)
    present = np.zeros((n, n), bool)
    present[net.src, net.dst] = True
    absent = ~present[iu, ju]
    ni, nj = iu[absent], ju[absent]
    total = K ** n
    digits = K ** np.arange(n - 1, -1, -1)
    parts = []
    for start in range(0, total, _CHUNK):
        codes = np.arange(start, min(start + _CHUNK, total))
        Z = (codes[:, None] // digits) % K
        ll = t.log_pi[Z].sum(axis=1)
        ll += t.log_1mp[Z[:, ni], Z[:, nj]].sum(axis=1)
        zs, zd = Z[:, net.src], Z[:, net.dst]
        if t.binary:
            ll += t.log_p[zs, zd].sum(axis=1)
        else:
            ll += t.edge[np.arange(net.n_edges), zs, zd].sum(axis=1)
        parts.append(special.logsumexp(ll))
    return float(special.logsumexp(parts))
