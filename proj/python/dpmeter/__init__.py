"""Differentially private smart-meter aggregation: python surface.

Thin re-export of the compiled core; see the package README for the
protocol itself.
"""

from ._core import (
    ClusterConfig,
    RoundResult,
    calibrate_lambda,
    catalog_names,
    collusion_success_prob,
    expected_error_series,
    gamma_diff_moments,
    generate_slots,
    k_slot_compromise_prob,
    lying_supplier_success_prob,
    ml_inference_experiment,
    ml_success_bound,
    run_round,
    simulate_attack,
    slot_lambdas,
    utility_bounds,
    window_epsilon,
)

__all__ = [
    "ClusterConfig",
    "RoundResult",
    "calibrate_lambda",
    "catalog_names",
    "collusion_success_prob",
    "expected_error_series",
    "gamma_diff_moments",
    "generate_slots",
    "k_slot_compromise_prob",
    "lying_supplier_success_prob",
    "ml_inference_experiment",
    "ml_success_bound",
    "run_round",
    "simulate_attack",
    "slot_lambdas",
    "utility_bounds",
    "window_epsilon",
]
