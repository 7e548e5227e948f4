import numpy as np
import pytest

from npwnet.locdens import KernelSpec, WeightedSample, fit_local_density, make_grid
from npwnet.network import from_arrays
from npwnet.varem import ModelParams


def random_network(rng, n, p_edge=0.4, kind="normal"):
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p_edge
    src, dst = iu[keep], ju[keep]
    if kind == "gamma":
        w = rng.gamma(3.0, 0.5, size=src.size)
    elif kind == "none":
        w = np.zeros(src.size)
    else:
        w = rng.normal(size=src.size) * 1.5
    return from_arrays(n, src, dst, w)


def random_params(rng, net, K, mode):
    """Arbitrary (not fitted) parameters for property checks."""
    theta = rng.normal(scale=1.0, size=K)
    pi = rng.dirichlet(np.ones(K) * 2.0)
    if mode == "none":
        return ModelParams(theta, pi, "none")
    if mode == "normal":
        bp = np.empty((K, K, 2))
        for k in range(K):
            for l in range(k, K):
                bp[k, l] = bp[l, k] = (rng.normal(), rng.uniform(0.5, 2.0))
        return ModelParams(theta, pi, "normal", block_params=bp)
    if mode == "gamma":
        bp = np.empty((K, K, 2))
        for k in range(K):
            for l in range(k, K):
                bp[k, l] = bp[l, k] = (rng.uniform(1.5, 5.0), rng.uniform(0.5, 3.0))
        return ModelParams(theta, pi, "gamma", block_params=bp)
    w = net.weight
    grid = make_grid(w, 0.5, 101)
    dens = {}
    for k in range(K):
        for l in range(k, K):
            m = rng.random(w.size) + 1e-3
            s = WeightedSample(w, m)
            dens[(k, l)] = fit_local_density(s, grid, KernelSpec(0.6), degree=2)
    return ModelParams(theta, pi, "nonparametric", densities=dens)


def random_gamma(rng, n, K, alpha=1.0):
    return rng.dirichlet(np.ones(K) * alpha, size=n)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance-criterion verdicts, printed at the end of the session
ACCEPTANCE_LINES = []


def record_criterion(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
