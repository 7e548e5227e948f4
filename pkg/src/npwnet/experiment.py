"""Simulation-study helpers shared by the command line and the test-suite."""
from __future__ import annotations

import itertools
import os
import warnings
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .errors import NpwnetError
from .metrics import MetricReport, descriptive_stats, ks_statistic, rand_index, rase_theta_detail
from .simulate import GeneratorConfig, simulate
from .varem import FitConfig, fit


def align_clusters(z_true, z_hat, K: int) -> np.ndarray:
    """Permutation ``perm`` with estimated cluster ``perm[k]`` matched to true ``k``.

    Chosen to maximize label agreement over all ``K!`` relabelings.
    """
    z_true = np.asarray(z_true)
    z_hat = np.asarray(z_hat)
    table = np.zeros((K, K))
    np.add.at(table, (z_true, z_hat), 1.0)
    best, best_perm = -1.0, tuple(range(K))
    for perm in itertools.permutations(range(K)):
        score = table[np.arange(K), list(perm)].sum()
        if score > best:
            best, best_perm = score, perm
    return np.asarray(best_perm)


def evaluate(net, result, z_true=None, theta_true=None, weight_model=None) -> MetricReport:
    """Metrics of one fit against whatever ground truth is available."""
    rep = MetricReport()
    if net.n_edges >= 3 and np.var(net.weight) > 0:
        rep.descriptive["all"] = descriptive_stats(net.weight)
    if z_true is not None:
        rep.log_ri = float(np.log(rand_index(z_true, result.hard_labels)))
    if theta_true is not None and len(theta_true) == result.params.K:
        rep.log_rase_theta, rep.rase_perfect = rase_theta_detail(result.params.theta, theta_true)
    p = result.params
    if (z_true is not None and weight_model is not None and weight_model.kind != "none"
            and p.densities is not None and weight_model.K == p.K):
        perm = align_clusters(z_true, result.hard_labels, p.K)
        for k in range(p.K):
            for l in range(k, p.K):
                est = p.density(perm[k], perm[l])
                rep.ks_per_block[(k, l)] = ks_statistic(est, weight_model.density(k, l))
    return rep


def bench_modes(weight_kind: str):
    """Fitted modes for a bench: nonparametric, the matching parametric oracle, binary."""
    modes = ["nonparametric"]
    if weight_kind in ("normal", "gamma"):
        modes.append(weight_kind)
    modes.append("none")
    return modes


def bench_replicate(r: int, gen: GeneratorConfig, fit_cfg: FitConfig, base_seed: int):
    """Simulate one replicate and fit every mode; returns long-format rows."""
    seed = base_seed + r
    g = GeneratorConfig(gen.n, gen.K, gen.pi, gen.theta, gen.weight_model, seed)
    rows = []
    z, net = simulate(g)
    for mode in bench_modes(g.weight_model.kind):
        cfg = FitConfig(**{**fit_cfg.to_dict(), "weight_mode": mode, "seed": seed})
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                res = fit(net, cfg)
        except (NpwnetError, FloatingPointError, ValueError) as exc:
            rows.append((r, mode, "error", type(exc).__name__))
            continue
        rep = evaluate(net, res, z, g.theta, g.weight_model)
        rows.append((r, mode, "ri", float(np.exp(rep.log_ri))))
        rows.append((r, mode, "log_ri", rep.log_ri))
        if rep.log_rase_theta is not None:
            rows.append((r, mode, "log_rase_theta", rep.log_rase_theta))
        for (k, l), v in sorted(rep.ks_per_block.items()):
            rows.append((r, mode, f"ks_{k}{l}", v))
        rows.append((r, mode, "converged", int(res.converged)))
        rows.append((r, mode, "n_iter", res.n_iter))
        rows.append((r, mode, "final_elbo", res.final_elbo))
    return rows


def worker_count() -> int:
    """Worker cap from ``NPWNET_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get("NPWNET_THREADS", "0").strip() or "0"
    try:
        k = int(raw)
    except ValueError:
        k = 0
    return k if k > 0 else (os.cpu_count() or 1)


def run_bench(gen: GeneratorConfig, fit_cfg: FitConfig, replicates: int, base_seed: int):
    """All replicates' rows, ordered by replicate whatever the worker count."""
    workers = min(worker_count(), max(replicates, 1))
    if workers <= 1:
        chunks = [bench_replicate(r, gen, fit_cfg, base_seed) for r in range(replicates)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            chunks = list(ex.map(bench_replicate, range(replicates), [gen] * replicates,
                                 [fit_cfg] * replicates, [base_seed] * replicates))
    return [row for chunk in chunks for row in chunk]


def ks_summary(rows):
    """``{block: (mean, median)}`` of KS x 100 for the nonparametric mode."""
    by_block = {}
    for _, mode, metric, value in rows:
        if mode == "nonparametric" and metric.startswith("ks_"):
            by_block.setdefault(metric[3:], []).append(100.0 * float(value))
    return {b: (float(np.mean(v)), float(np.median(v))) for b, v in sorted(by_block.items())}
