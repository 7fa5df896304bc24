"""Ensembles of least-squares fits on random row/column submatrices."""

import json

from ._ensemble_ols import (
    EnsembleOLSError,
    ensemble_risk,
    estimate_pair_terms,
    finite_k_optimal_alpha,
    finite_pair_term,
    fit_dropout,
    fit_ensemble,
    fit_generalized_dropout,
    fit_ridge,
    generate_problem,
    interpolator_variance_term,
    large_ensemble_risk,
    limiting_bias_variance,
    mu_scaled_risk,
    optimal_alpha,
    optimal_mu,
    optimal_ridge_risk,
    risk_convergence_sim,
    run_cli,
)
from . import _ensemble_ols

__all__ = [
    "EnsembleOLSError",
    "ensemble_risk",
    "estimate_pair_terms",
    "finite_k_optimal_alpha",
    "finite_pair_term",
    "fit_dropout",
    "fit_ensemble",
    "fit_generalized_dropout",
    "fit_ridge",
    "generate_problem",
    "interpolator_variance_term",
    "large_ensemble_risk",
    "limiting_bias_variance",
    "mu_scaled_risk",
    "optimal_alpha",
    "optimal_mu",
    "optimal_ridge_risk",
    "risk_convergence_sim",
    "run_cli",
    "run_experiment",
    "run_validation",
]


def run_experiment(name, **overrides):
    """Run fig2 / fig3 / fig4 / validate and return the CSV table as text."""
    return _ensemble_ols._run_experiment(name, json.dumps(overrides))


def run_validation(**overrides):
    """Run the validation suite and return its JSON report as a dict."""
    return json.loads(_ensemble_ols._run_validation(json.dumps(overrides)))
