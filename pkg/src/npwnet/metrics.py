"""Evaluation metrics for recovered partitions, parameters and densities."""
from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DegenerateSample, KTooLargeForExactMatch, LengthMismatch
from .locdens import DensityEstimate, evaluate_density

RASE_EPS = 1e-300
MAX_PERMUTATION_K = 8
KS_REFINE = 4


def rand_index(z, z_hat) -> float:
    """Fraction of node pairs on which two partitions agree about co-membership."""
    z = np.asarray(z)
    z_hat = np.asarray(z_hat)
    if z.shape != z_hat.shape or z.ndim != 1:
        raise LengthMismatch(f"label vectors differ in shape: {z.shape} vs {z_hat.shape}")
    n = z.size
    if n < 2:
        raise LengthMismatch("rand index needs at least two nodes")
    _, a = np.unique(z, return_inverse=True)
    _, b = np.unique(z_hat, return_inverse=True)
    table = np.zeros((a.max() + 1, b.max() + 1))
    np.add.at(table, (a, b), 1.0)

    def pairs(x):
        return float(np.sum(x * (x - 1.0)) / 2.0)

    same_both = pairs(table)
    same_a = pairs(table.sum(axis=1))
    same_b = pairs(table.sum(axis=0))
    total = n * (n - 1) / 2.0
    agree = total + 2.0 * same_both - same_a - same_b
    return float(agree / total)


def log_rand_index(z, z_hat) -> float:
    return math.log(rand_index(z, z_hat))


def _best_sq_error(theta_hat, theta):
    K = theta.size
    if K > MAX_PERMUTATION_K:
        raise KTooLargeForExactMatch(f"K = {K} exceeds {MAX_PERMUTATION_K} for exhaustive matching")
    best = math.inf
    for perm in itertools.permutations(range(K)):
        best = min(best, float(np.mean((theta_hat[list(perm)] - theta) ** 2)))
    return best


def rase_theta(theta_hat, theta_true) -> float:
    """Log root mean squared error of ``theta_hat``, minimized over relabelings.

    A perfect match returns ``0.5 * log(1e-300)`` instead of ``-inf``; use
    :func:`rase_theta_detail` to see the flag.
    """
    return rase_theta_detail(theta_hat, theta_true)[0]


def rase_theta_detail(theta_hat, theta_true):
    """``(log_rase, perfect_fit)``."""
    th = np.asarray(theta_hat, dtype=float).ravel()
    tt = np.asarray(theta_true, dtype=float).ravel()
    if th.shape != tt.shape:
        raise LengthMismatch(f"theta lengths differ: {th.size} vs {tt.size}")
    mse = _best_sq_error(th, tt)
    perfect = mse <= RASE_EPS
    return 0.5 * math.log(max(mse, RASE_EPS)), perfect


def ks_statistic(est: DensityEstimate, true_density) -> float:
    """Sup-distance between an estimated and a true density.

    Evaluated on the estimate's grid refined ``KS_REFINE`` times by linear
    interpolation in log-density.
    """
    g = est.grid
    fine = np.interp(np.arange((g.size - 1) * KS_REFINE + 1) / KS_REFINE, np.arange(g.size), g)
    diff = np.abs(evaluate_density(est, fine) - np.asarray(true_density(fine), dtype=float))
    return float(np.max(diff))


def descriptive_stats(weights):
    """Sample skewness ``m3 / m2**1.5`` and (non-excess) kurtosis ``m4 / m2**2``."""
    w = np.asarray(weights, dtype=float).ravel()
    if w.size < 3:
        raise DegenerateSample("descriptive statistics need at least 3 values")
    if not np.var(w) > 0:
        raise DegenerateSample("descriptive statistics need non-zero variance")
    skew = float(stats.skew(w, bias=True))
    kurt = float(stats.kurtosis(w, fisher=False, bias=True))
    return skew, kurt


@dataclass
class MetricReport:
    log_ri: float | None = None
    log_rase_theta: float | None = None
    rase_perfect: bool = False
    ks_per_block: dict = field(default_factory=dict)
    descriptive: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "log_ri": self.log_ri,
            "log_rase_theta": self.log_rase_theta,
            "rase_perfect_fit": self.rase_perfect,
            "ks_per_block": {f"{k},{l}": v for (k, l), v in sorted(self.ks_per_block.items())},
            "descriptive": {name: {"skewness": s, "kurtosis": k}
                            for name, (s, k) in sorted(self.descriptive.items())},
        }

    def rows(self):
        """Long-format ``(metric, value)`` pairs."""
        out = []
        if self.log_ri is not None:
            out.append(("log_ri", self.log_ri))
        if self.log_rase_theta is not None:
            out.append(("log_rase_theta", self.log_rase_theta))
        for (k, l), v in sorted(self.ks_per_block.items()):
            out.append((f"ks_{k}{l}", v))
        for name, (s, k) in sorted(self.descriptive.items()):
            out.append((f"skewness_{name}", s))
            out.append((f"kurtosis_{name}", k))
        return out

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["metric", "value"])
            for name, v in self.rows():
                w.writerow([name, repr(float(v))])
