"""Sampling weighted networks from the planted block model.

Generation runs in three stages: multinomial memberships, independent
Bernoulli dyads with ``p_kl = logit^-1(theta_k + theta_l)``, then one weight
per present edge drawn from the block pair's distribution.

All randomness goes through numpy's PCG64 generator
(:func:`numpy.random.default_rng`).  The seed is expanded with
:class:`numpy.random.SeedSequence` into two independent child streams, one for
memberships and one for the network, so each stage is reproducible on its own.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .errors import InvalidConfig, InvalidSimplex
from .network import WeightedNetwork, check_labels, from_arrays

WEIGHT_KINDS = ("normal", "gamma", "none")

# Defaults for two clusters, indexed (1,1), (1,2), (2,2).
DEFAULT_NORMAL = {(0, 0): (-1.0, 1.0), (0, 1): (0.0, 1.0), (1, 1): (1.0, 1.0)}
DEFAULT_GAMMA = {(0, 0): (2.0, 1.2), (0, 1): (8.0, 2.9), (1, 1): (20.0, 4.7)}

THETA_S1 = (-1.0, 1.0)
THETA_S2 = (-0.5, 0.5)


def _symmetric_table(block_params, K):
    if not isinstance(block_params, dict):
        table = np.asarray(block_params, dtype=float)
        if table.shape == (K, K, 2):
            return table
    else:
        table = np.full((K, K, 2), np.nan)
        for (k, l), v in block_params.items():
            table[k, l] = table[l, k] = v
        if np.isnan(table).any():
            raise InvalidConfig("block parameter table is missing entries")
        return table
    raise InvalidConfig(f"block_params must be a {K}x{K}x2 table or a dict keyed by (k, l)")


@dataclass(frozen=True)
class WeightModel:
    """Block-conditional weight distribution.

    ``block_params[k, l]`` holds ``(mean, sd)`` for ``kind="normal"`` and
    ``(shape, rate)`` for ``kind="gamma"``; the Gamma density is
    ``rate**shape * w**(shape-1) * exp(-rate*w) / Gamma(shape)``.
    ``kind="none"`` produces binary networks whose edges all carry weight 0.
    """

    kind: str
    block_params: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise InvalidConfig(f"unknown weight kind {self.kind!r}")
        if self.kind == "none":
            return
        if self.block_params is None:
            raise InvalidConfig(f"{self.kind} weights need block_params")
        table = np.asarray(self.block_params, dtype=float)
        if table.ndim != 3 or table.shape[0] != table.shape[1] or table.shape[2] != 2:
            raise InvalidConfig("block_params must have shape (K, K, 2)")
        if not np.allclose(table, table.transpose(1, 0, 2)):
            raise InvalidConfig("block_params must be symmetric in (k, l)")
        if self.kind == "normal" and np.any(table[..., 1] <= 0):
            raise InvalidConfig("normal sd must be positive")
        if self.kind == "gamma" and np.any(table <= 0):
            raise InvalidConfig("gamma shape and rate must be positive")
        object.__setattr__(self, "block_params", table)

    @classmethod
    def normal(cls, params=None, K=2):
        return cls("normal", _symmetric_table(DEFAULT_NORMAL if params is None else params, K))

    @classmethod
    def gamma(cls, params=None, K=2):
        return cls("gamma", _symmetric_table(DEFAULT_GAMMA if params is None else params, K))

    @property
    def K(self):
        return None if self.block_params is None else self.block_params.shape[0]

    def logpdf(self, k, l, w):
        w = np.asarray(w, dtype=float)
        a, b = self.block_params[k, l]
        if self.kind == "normal":
            return stats.norm.logpdf(w, loc=a, scale=b)
        if self.kind == "gamma":
            return stats.gamma.logpdf(w, a, scale=1.0 / b)
        raise InvalidConfig("weight kind 'none' has no density")

    def pdf(self, k, l, w):
        return np.exp(self.logpdf(k, l, w))

    def density(self, k, l):
        """Callable true density of block pair ``(k, l)``."""
        return lambda w: self.pdf(k, l, w)


@dataclass(frozen=True)
class GeneratorConfig:
    n: int
    K: int
    pi: np.ndarray
    theta: np.ndarray
    weight_model: WeightModel = field(default_factory=lambda: WeightModel("none"))
    seed: int = 0

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        theta = np.asarray(self.theta, dtype=float)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "theta", theta)
        if self.K < 1:
            raise InvalidConfig(f"K must be >= 1, got {self.K}")
        if self.n < 2:
            raise InvalidConfig(f"n must be >= 2, got {self.n}")
        if theta.shape != (self.K,):
            raise InvalidConfig(f"theta must have length K={self.K}")
        if not np.all(np.isfinite(theta)):
            raise InvalidConfig("theta must be finite")
        if self.weight_model.kind != "none" and self.weight_model.K != self.K:
            raise InvalidConfig("weight model table size does not match K")

    def check_simplex(self):
        pi = self.pi
        if pi.shape != (self.K,) or np.any(pi < 0) or not np.isfinite(pi).all() \
                or abs(pi.sum() - 1.0) > 1e-9:
            raise InvalidSimplex(f"pi must be a length-{self.K} probability vector, got {pi.tolist()}")


def _streams(seed):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2)]


def edge_probability(theta, k: int, l: int) -> float:
    """``logit^-1(theta_k + theta_l)``."""
    theta = np.asarray(theta, dtype=float)
    return float(special.expit(theta[k] + theta[l]))


def edge_probability_matrix(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    return special.expit(theta[:, None] + theta[None, :])


def sample_memberships(cfg: GeneratorConfig) -> np.ndarray:
    """Draw ``n`` i.i.d. cluster labels from Multinomial(1, pi)."""
    cfg.check_simplex()
    rng = _streams(cfg.seed)[0]
    pi = cfg.pi / cfg.pi.sum()
    return rng.choice(cfg.K, size=cfg.n, p=pi).astype(np.int64)


def sample_network(labels, cfg: GeneratorConfig) -> WeightedNetwork:
    """Draw dyads and edge weights given memberships.

    Each pair ``i < j`` is an independent Bernoulli edge; every present edge
    gets an independent weight from its block's :class:`WeightModel`.
    """
    cfg.check_simplex()
    z = check_labels(labels, cfg.K)
    if z.size != cfg.n:
        raise InvalidConfig(f"expected {cfg.n} labels, got {z.size}")
    rng = _streams(cfg.seed)[1]
    iu, ju = np.triu_indices(cfg.n, k=1)
    p = edge_probability_matrix(cfg.theta)[z[iu], z[ju]]
    present = rng.random(iu.size) < p
    src, dst = iu[present], ju[present]
    zi, zj = z[src], z[dst]
    wm = cfg.weight_model
    if wm.kind == "none":
        w = np.zeros(src.size)
    else:
        a = wm.block_params[zi, zj, 0]
        b = wm.block_params[zi, zj, 1]
        if wm.kind == "normal":
            w = rng.normal(a, b)
        else:
            w = rng.gamma(a, 1.0 / b)
    return from_arrays(cfg.n, src, dst, w)


def simulate(cfg: GeneratorConfig):
    """Convenience wrapper returning ``(labels, network)``."""
    z = sample_memberships(cfg)
    return z, sample_network(z, cfg)


def planted_config(n, theta=THETA_S1, kind="normal", seed=0, pi=None, block_params=None):
    """Two-or-more-cluster config with uniform ``pi`` and default block tables."""
    theta = np.asarray(theta, dtype=float)
    K = theta.size
    if pi is None:
        pi = np.full(K, 1.0 / K)
    if kind == "normal":
        wm = WeightModel.normal(block_params, K=K)
    elif kind == "gamma":
        wm = WeightModel.gamma(block_params, K=K)
    else:
        wm = WeightModel("none")
    return GeneratorConfig(n=n, K=K, pi=pi, theta=theta, weight_model=wm, seed=seed)
