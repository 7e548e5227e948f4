"""Parameter, configuration and result containers for the variational EM."""
from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import special, stats

from ..errors import InvalidConfig, ShapeMismatch
from ..locdens import DensityEstimate, LOG_DENSITY_FLOOR, log_density_at

WEIGHT_MODES = ("nonparametric", "normal", "gamma", "none")

GAMMA_EPS = 1e-10


def pair_keys(K):
    return [(k, l) for k in range(K) for l in range(k, K)]


@dataclass(frozen=True)
class ModelParams:
    """Sparsity parameters, mixture proportions and block weight model.

    ``densities`` maps each unordered pair ``(k, l)`` with ``k <= l`` to a
    :class:`DensityEstimate` (nonparametric mode only).  ``block_params`` is
    a symmetric ``(K, K, 2)`` table of ``(mean, sd)`` or ``(shape, rate)``
    for the parametric modes.
    """

    theta: np.ndarray
    pi: np.ndarray
    weight_mode: str = "nonparametric"
    densities: dict | None = None
    block_params: np.ndarray | None = None

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        pi = np.asarray(self.pi, dtype=float)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "pi", pi)
        if self.weight_mode not in WEIGHT_MODES:
            raise InvalidConfig(f"unknown weight mode {self.weight_mode!r}")
        K = theta.size
        if theta.ndim != 1 or pi.shape != (K,):
            raise ShapeMismatch("theta and pi must be vectors of equal length")
        if np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-8:
            raise InvalidConfig("pi must lie in the simplex")
        if self.weight_mode == "nonparametric":
            if self.densities is None or set(self.densities) != set(pair_keys(K)):
                raise InvalidConfig("nonparametric mode needs a density for every pair k <= l")
        elif self.densities is not None:
            raise InvalidConfig("densities are only allowed in nonparametric mode")
        if self.weight_mode in ("normal", "gamma"):
            bp = np.asarray(self.block_params, dtype=float) if self.block_params is not None else None
            if bp is None or bp.shape != (K, K, 2):
                raise InvalidConfig("parametric modes need a (K, K, 2) block_params table")
            object.__setattr__(self, "block_params", bp)
        elif self.block_params is not None:
            raise InvalidConfig("block_params only apply to the normal and gamma modes")

    @property
    def K(self) -> int:
        return self.theta.size

    @property
    def edge_prob(self) -> np.ndarray:
        return special.expit(self.theta[:, None] + self.theta[None, :])

    def density(self, k, l) -> DensityEstimate:
        return self.densities[(min(k, l), max(k, l))]

    def log_weight_density(self, k, l, w) -> np.ndarray:
        """Floored ``log f_kl(w)``; zeros in binary mode."""
        w = np.asarray(w, dtype=float)
        mode = self.weight_mode
        if mode == "none":
            return np.zeros_like(w)
        if mode == "nonparametric":
            return log_density_at(self.density(k, l), w)
        a, b = self.block_params[k, l]
        with np.errstate(divide="ignore"):
            if mode == "normal":
                out = stats.norm.logpdf(w, loc=a, scale=b)
            else:
                out = stats.gamma.logpdf(w, a, scale=1.0 / b)
        return np.maximum(out, LOG_DENSITY_FLOOR)

    def density_penalty(self) -> np.ndarray:
        """``integral f_kl - 1`` per pair; zero for normalized densities."""
        K = self.K
        pen = np.zeros((K, K))
        if self.weight_mode == "nonparametric":
            for k, l in pair_keys(K):
                pen[k, l] = pen[l, k] = self.density(k, l).integral() - 1.0
        return pen

    def permuted(self, perm) -> "ModelParams":
        """Relabel clusters so new cluster ``c`` is old cluster ``perm[c]``."""
        perm = np.asarray(perm)
        dens = None
        if self.densities is not None:
            dens = {(k, l): self.density(perm[k], perm[l]) for k, l in pair_keys(self.K)}
        bp = None if self.block_params is None else self.block_params[np.ix_(perm, perm)]
        return ModelParams(self.theta[perm], self.pi[perm], self.weight_mode, dens, bp)


@dataclass(frozen=True)
class FitConfig:
    K: int
    weight_mode: str = "nonparametric"
    max_iter: int = 200
    elbo_rel_tol: float = 1e-6
    restarts: int = 5
    mm_inner_iters: int = 5
    seed: int = 0
    degree: int = 2
    grid_size: int = 101
    truncation: float = 4.0

    def __post_init__(self):
        if self.weight_mode not in WEIGHT_MODES:
            raise InvalidConfig(f"unknown weight mode {self.weight_mode!r}")
        for name in ("K", "max_iter", "restarts", "mm_inner_iters", "grid_size"):
            if int(getattr(self, name)) < 1:
                raise InvalidConfig(f"{name} must be a positive integer")
        if not self.elbo_rel_tol > 0:
            raise InvalidConfig("elbo_rel_tol must be positive")
        if self.degree not in (0, 1, 2):
            raise InvalidConfig("degree must be 0, 1 or 2")

    def to_dict(self):
        return asdict(self)


@dataclass
class FitResult:
    params: ModelParams
    gamma: np.ndarray
    hard_labels: np.ndarray
    elbo_trace: list
    converged: bool
    icl: float | None = None
    config: FitConfig | None = None
    restart: int = 0
    restart_elbos: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def final_elbo(self) -> float:
        return float(self.elbo_trace[-1])

    @property
    def n_iter(self) -> int:
        return len(self.elbo_trace) - 1


def hard_labels(gamma) -> np.ndarray:
    """Row-wise argmax; ties go to the lowest cluster index."""
    return np.argmax(np.asarray(gamma), axis=1).astype(np.int64)


def clamp_gamma(gamma, eps=GAMMA_EPS) -> np.ndarray:
    g = np.clip(np.asarray(gamma, dtype=float), eps, 1.0)
    return g / g.sum(axis=1, keepdims=True)


def check_gamma(gamma, n, K) -> np.ndarray:
    g = np.asarray(gamma, dtype=float)
    if g.shape != (n, K):
        raise ShapeMismatch(f"gamma has shape {g.shape}, expected {(n, K)}")
    return g
