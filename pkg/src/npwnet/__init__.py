"""Clustering weighted networks with block-wise nonparametric weight densities."""
from .errors import *  # noqa: F401,F403
from .locdens import (DensityEstimate, KernelSpec, LocalFitCoefficients, WeightedSample,
                      evaluate_density, fit_local_density, local_objective, normalize_density,
                      select_bandwidth)
from .metrics import MetricReport, descriptive_stats, ks_statistic, rand_index, rase_theta
from .modelsel import IclReport, icl, select_k
from .network import WeightedNetwork, build_network, degree
from .simulate import (GeneratorConfig, WeightModel, edge_probability, sample_memberships,
                       sample_network, simulate)
from .varem import (FitConfig, FitResult, ModelParams, e_step, elbo, exact_loglik_small, fit,
                    m_step_pi, m_step_theta, m_step_weights, solve_node_qp, surrogate_q)

__version__ = "0.1.0"
