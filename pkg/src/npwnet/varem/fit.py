"""Full variational EM fit with random restarts."""
from __future__ import annotations

import warnings

import numpy as np
from scipy.cluster.vq import kmeans2

from ..errors import AllRestartsFailed, InvalidConfig, NpwnetError
from ..network import WeightedNetwork
from .estep import e_step
from .mstep import m_step_pi, m_step_theta, m_step_weights, pooled_density
from .objective import elbo
from .params import (FitConfig, FitResult, ModelParams, check_gamma, clamp_gamma,
                     hard_labels)

INIT_MAIN = 0.9
DIRICHLET_CONCENTRATION = 50.0
KMEANS_ITERS = 20


def node_features(net: WeightedNetwork, weight_mode: str) -> np.ndarray:
    """Standardized (normalized degree, mean incident weight) per node.

    Binary mode uses degree alone since every weight is uninformative there.
    """
    cols = [net.degrees / max(net.n - 1, 1)]
    if weight_mode != "none":
        cols.append(net.mean_incident_weight())
    X = np.column_stack(cols).astype(float)
    sd = X.std(axis=0)
    X = X - X.mean(axis=0)
    np.divide(X, sd, out=X, where=sd > 0)
    return X


def initial_gamma(net: WeightedNetwork, K: int, rng: np.random.Generator,
                  weight_mode: str = "nonparametric") -> np.ndarray:
    """k-means start softened to 0.9 / 0.1 and jittered with Dirichlet noise."""
    if K == 1:
        return np.ones((net.n, 1))
    X = node_features(net, weight_mode)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        _, labels = kmeans2(X, K, iter=KMEANS_ITERS, minit="++", seed=rng)
    base = np.full((net.n, K), (1.0 - INIT_MAIN) / (K - 1))
    base[np.arange(net.n), labels] = INIT_MAIN
    noisy = np.vstack([rng.dirichlet(DIRICHLET_CONCENTRATION * row) for row in base])
    return clamp_gamma(noisy)


def _make_params(theta, pi, mode, weights):
    if mode == "nonparametric":
        return ModelParams(theta, pi, mode, densities=weights)
    if mode in ("normal", "gamma"):
        return ModelParams(theta, pi, mode, block_params=weights)
    return ModelParams(theta, pi, mode)


def _m_step(net, G, theta, weights, config, safeguard, diag, pooled=None):
    """One pass of pi, theta and weight updates; returns (params, elbo)."""
    pi = m_step_pi(G)
    theta = m_step_theta(net, G, theta)
    mode = config.weight_mode
    new_weights, flags = m_step_weights(net, G, config, with_flags=True, pooled=pooled)
    params = _make_params(theta, pi, mode, new_weights)
    value = elbo(net, G, params)
    if flags:
        diag["empty_blocks"] = diag.get("empty_blocks", 0) + len(flags)
    if safeguard and weights is not None and mode != "none":
        old = _make_params(theta, pi, mode, weights)
        old_value = elbo(net, G, old)
        if old_value > value:
            # the local likelihood fit need not maximize the ELBO exactly;
            # keep the previous densities when the refit would lower it
            diag["weights_rejected"] = diag.get("weights_rejected", 0) + 1
            return old, old_value
    return params, value


def _run(net, config: FitConfig, G0, restart: int) -> FitResult:
    K = config.K
    diag = {"weights_rejected": 0, "empty_blocks": 0}
    G = clamp_gamma(G0)
    pooled = pooled_density(net, config) if config.weight_mode == "nonparametric" else None
    params, value = _m_step(net, G, np.zeros(K), None, config, False, diag, pooled)
    trace = [value]
    converged = False
    for _ in range(config.max_iter):
        G = e_step(net, G, params, config.mm_inner_iters)
        weights = params.densities if config.weight_mode == "nonparametric" else params.block_params
        params, value = _m_step(net, G, params.theta, weights, config, True, diag, pooled)
        prev = trace[-1]
        trace.append(value)
        if abs(value - prev) <= config.elbo_rel_tol * max(abs(prev), 1e-300):
            converged = True
            break
    return FitResult(params=params, gamma=G, hard_labels=hard_labels(G), elbo_trace=trace,
                     converged=converged, config=config, restart=restart, diagnostics=diag)


def fit(net: WeightedNetwork, config: FitConfig, init_gamma=None) -> FitResult:
    """Fit the block model by variational EM and keep the best restart.

    Restart ``r`` draws its start from ``default_rng([seed, r])``.  Passing
    ``init_gamma`` runs a single fit from that start instead.
    """
    if net.n < config.K:
        raise InvalidConfig(f"n = {net.n} nodes cannot fill K = {config.K} clusters")
    if config.weight_mode != "none" and net.n_edges == 0:
        raise InvalidConfig("weighted modes need at least one edge")
    if init_gamma is not None:
        G0 = check_gamma(init_gamma, net.n, config.K)
        res = _run(net, config, G0, 0)
        res.restart_elbos = [res.final_elbo]
        return res
    best, elbos, errors = None, [], []
    for r in range(config.restarts):
        rng = np.random.default_rng([config.seed, r])
        try:
            res = _run(net, config, initial_gamma(net, config.K, rng, config.weight_mode), r)
        except (NpwnetError, FloatingPointError) as exc:
            errors.append(exc)
            elbos.append(float("nan"))
            continue
        elbos.append(res.final_elbo)
        if best is None or res.final_elbo > best.final_elbo:
            best = res
    if best is None:
        raise AllRestartsFailed(f"all {config.restarts} restarts failed; last error: {errors[-1]!r}")
    best.restart_elbos = elbos
    return best
