"""The density engine on its own: log-quadratic local likelihood vs truth.

Fits a skewed Gamma sample and a Normal sample, reports the worst absolute
error on the grid and how close the estimate integrates to one.  Mass
weights are what the clustering step feeds in; here we also show that
down-weighting half of a mixture recovers the other component.

Run:  python demos/03_local_likelihood_density.py
"""
import numpy as np
from scipy import stats

from npwnet.locdens import KernelSpec, WeightedSample, bandwidth_for_degree, fit_local_density

rng = np.random.default_rng(0)

for name, x, truth in [
    ("Normal(0,1)", rng.normal(size=2000), stats.norm.pdf),
    ("Gamma(2, rate 1.2)", rng.gamma(2.0, 1 / 1.2, size=2000), stats.gamma(2.0, scale=1 / 1.2).pdf),
]:
    s = WeightedSample.unit(x)
    h = bandwidth_for_degree(s, 2)
    grid = np.linspace(x.min() - 3 * h, x.max() + 3 * h, 101)
    est = fit_local_density(s, grid, KernelSpec(h), degree=2)
    err = np.max(np.abs(est.density - truth(grid)))
    print(f"{name:20s} bandwidth {h:.3f}  sup error {err:.4f}  integral {est.integral():.6f}")

# a 50/50 mixture where the masses say "mostly the right-hand component"
left, right = rng.normal(-3, 1, 1500), rng.normal(3, 1, 1500)
x = np.concatenate([left, right])
masses = np.concatenate([np.full(1500, 0.02), np.full(1500, 0.98)])
s = WeightedSample(x, masses)
h = bandwidth_for_degree(s, 2)
grid = np.linspace(-7, 7, 141)
est = fit_local_density(s, grid, KernelSpec(h), degree=2)
mass_right = est.density[grid > 0].sum() * (grid[1] - grid[0])
print(f"weighted mixture: fraction of estimated mass right of zero = {mass_right:.3f}")
