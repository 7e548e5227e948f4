"""Pick the number of clusters with the integrated classification likelihood.

A network with two planted communities is fitted for K = 1..4; the report
lists ICL per K and the winner.  Expect a couple of minutes on one core.

Run:  python demos/02_choose_number_of_clusters.py
"""
import warnings

from npwnet.modelsel import select_k
from npwnet.simulate import THETA_S1, planted_config, simulate
from npwnet.varem import FitConfig

warnings.simplefilter("ignore", RuntimeWarning)

z, net = simulate(planted_config(150, THETA_S1, "normal", seed=11))
report = select_k(net, [1, 2, 3, 4], FitConfig(1, "nonparametric", restarts=1, seed=0))

for entry in report.per_k:
    status = "ok" if entry.error is None else f"failed ({entry.error})"
    print(f"K={entry.K}  ICL={entry.icl:12.2f}  converged={entry.converged}  {status}")
print(f"selected K = {report.best_k}")
