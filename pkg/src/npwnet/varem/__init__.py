"""Variational EM for the nonparametric weighted block model."""
from .estep import e_step
from .exact import exact_loglik_small
from .fit import fit, initial_gamma
from .mstep import m_step_pi, m_step_theta, m_step_weights
from .objective import elbo, surrogate_coefficients, surrogate_q
from .params import (WEIGHT_MODES, FitConfig, FitResult, ModelParams, clamp_gamma,
                     hard_labels)
from .qp import solve_node_qp, solve_qp_batch

__all__ = [
    "e_step", "exact_loglik_small", "fit", "initial_gamma", "m_step_pi", "m_step_theta",
    "m_step_weights", "elbo", "surrogate_coefficients", "surrogate_q", "WEIGHT_MODES",
    "FitConfig", "FitResult", "ModelParams", "clamp_gamma", "hard_labels", "solve_node_qp",
    "solve_qp_batch",
]
