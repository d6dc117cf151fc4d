"""Bayesian persuasion when the sender only sees noisy classifier predictions."""

from .analysis import (
    HullMembership,
    LipschitzReport,
    brute_force_value,
    check_monotone_condition,
    concavification_value,
    indifference_gap,
    lipschitz_probe,
)
from .bayes_core import SignalingScheme, posterior, predicted_from_true, signal_likelihood, true_from_predicted
from .lp_engine import LPSolution, LPStandardForm, LPStatus, build_direct_lp, build_reformulated_lp, solve_lp
from .performative import PerformativeTrace, check_monotone_utility, performative_step, run_performative
from .signaling import PersuasionSolution, evaluate_scheme, no_signal_baseline, solve_optimal_scheme, user_welfare_check
from .state_model import (
    Belief,
    ConfusionModel,
    Instance,
    PerformativeConfig,
    Space,
    StateSpace,
    load_scenario,
)

__all__ = [
    "Belief",
    "ConfusionModel",
    "HullMembership",
    "Instance",
    "LPSolution",
    "LPStandardForm",
    "LPStatus",
    "LipschitzReport",
    "PerformativeConfig",
    "PerformativeTrace",
    "PersuasionSolution",
    "SignalingScheme",
    "Space",
    "StateSpace",
    "brute_force_value",
    "build_direct_lp",
    "build_reformulated_lp",
    "check_monotone_condition",
    "check_monotone_utility",
    "concavification_value",
    "evaluate_scheme",
    "indifference_gap",
    "lipschitz_probe",
    "load_scenario",
    "no_signal_baseline",
    "performative_step",
    "posterior",
    "predicted_from_true",
    "run_performative",
    "signal_likelihood",
    "solve_lp",
    "solve_optimal_scheme",
    "true_from_predicted",
    "user_welfare_check",
]
