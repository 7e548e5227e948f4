"""Integrated classification likelihood and selection of the cluster count."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MissingDensities, NpwnetError
from .network import WeightedNetwork
from .varem import FitConfig, FitResult, fit

ICL_PI_FLOOR = 1e-12


def icl_penalty(n: int, K: int) -> float:
    """``(K - 1) log n + K log(n (n - 1) / 2)``."""
    return (K - 1) * math.log(n) + K * math.log(n * (n - 1) / 2)


def complete_loglik(net: WeightedNetwork, labels, params) -> float:
    """Log-likelihood of the network and hard labels under ``params``.

    Weight densities are floored at 1e-12 and mixture weights at 1e-12.
    Binary mode has no weight term.
    """
    z = np.asarray(labels, dtype=np.int64)
    log_p = -np.logaddexp(0.0, -(params.theta[:, None] + params.theta[None, :]))
    log_1mp = -np.logaddexp(0.0, params.theta[:, None] + params.theta[None, :])
    counts = np.bincount(z, minlength=params.K).astype(float)
    # dyads per unordered block pair: c_k c_l off the diagonal, c_k (c_k - 1) / 2 on it
    pairs = np.outer(counts, counts)
    np.fill_diagonal(pairs, counts * (counts - 1.0) / 2.0)
    zs, zd = z[net.src], z[net.dst]
    e_counts = np.zeros((params.K, params.K))
    np.add.at(e_counts, (np.minimum(zs, zd), np.maximum(zs, zd)), 1.0)
    iu = np.triu_indices(params.K)
    total = float(np.sum(e_counts[iu] * log_p[iu] + (pairs[iu] - e_counts[iu]) * log_1mp[iu]))
    if params.weight_mode != "none":
        for k, l in zip(*iu):
            on = ((zs == k) & (zd == l)) | ((zs == l) & (zd == k))
            if on.any():
                total += float(params.log_weight_density(k, l, net.weight[on]).sum())
    total += float(np.log(np.maximum(params.pi, ICL_PI_FLOOR))[z].sum())
    return total


def icl(net: WeightedNetwork, fit_result: FitResult) -> float:
    """Modified ICL of a fitted model: complete log-likelihood minus penalty."""
    params = fit_result.params
    if params.weight_mode == "nonparametric" and not params.densities:
        raise MissingDensities("nonparametric fit has no densities")
    return complete_loglik(net, fit_result.hard_labels, params) - icl_penalty(net.n, params.K)


@dataclass
class IclEntry:
    K: int
    icl: float
    final_elbo: float
    converged: bool
    error: str | None = None


@dataclass
class IclReport:
    per_k: list = field(default_factory=list)
    best_k: int | None = None
    fits: dict = field(default_factory=dict, repr=False)

    def rows(self):
        return [(e.K, e.icl, e.final_elbo, e.converged) for e in self.per_k]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["K", "icl", "final_elbo", "converged"])
            for e in self.per_k:
                w.writerow([e.K, repr(float(e.icl)), repr(float(e.final_elbo)),
                            "true" if e.converged else "false"])

    def to_dict(self):
        return {
            "best_k": self.best_k,
            "per_k": [{"K": e.K, "icl": _json_float(e.icl), "final_elbo": _json_float(e.final_elbo),
                       "converged": e.converged, "error": e.error} for e in self.per_k],
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _json_float(x):
    x = float(x)
    return x if math.isfinite(x) else None


def select_k(net: WeightedNetwork, k_range, config: FitConfig) -> IclReport:
    """Fit every ``K`` in ``k_range`` with the same seed and pick the best ICL.

    Only converged fits compete for ``best_k``; if none converged, all
    successful fits do.  A failing ``K`` is recorded with ``icl = -inf`` and
    its error message instead of aborting the sweep.
    """
    ks = sorted({int(k) for k in k_range})
    if not ks or ks[0] < 1:
        raise ValueError("k_range must be a non-empty set of positive integers")
    report = IclReport()
    for K in ks:
        cfg = FitConfig(**{**config.to_dict(), "K": K})
        try:
            res = fit(net, cfg)
            res.icl = icl(net, res)
            report.fits[K] = res
            report.per_k.append(IclEntry(K, res.icl, res.final_elbo, res.converged))
        except (NpwnetError, FloatingPointError, ValueError) as exc:
            report.per_k.append(IclEntry(K, -math.inf, -math.inf, False, f"{type(exc).__name__}: {exc}"))
    ok = [e for e in report.per_k if e.error is None]
    pool = [e for e in ok if e.converged] or ok
    if pool:
        report.best_k = max(pool, key=lambda e: (e.icl, -e.K)).K
    return report
