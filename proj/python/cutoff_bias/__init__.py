"""Selection bias in data-driven subgroup treatment effects.

Python bindings over the C++ simulation engine: exact truth oracle,
trial generation, cutoff selection rules, and the bootstrap and
ABC-rejection bias corrections, plus a JSON-config grid runner that
mirrors the `cutoff-bias` command line tool.
"""

from ._core import (
    AbcResult,
    BootstrapResult,
    ConfigError,
    FittedLogistic,
    ModelCoefficients,
    Rule,
    Rule2Params,
    SelectionOutcome,
    SubsetDiagnostic,
    SubsetSummary,
    TrialData,
    __version__,
    abc_adjust,
    apply_rule,
    bootstrap_correct,
    fit_logistic,
    generate_trial,
    mle_selected_estimate,
    posterior_prob_exceeds,
    run_config_json,
    summarize_subsets,
    true_subset_effect,
    true_subset_effect_quadrature,
)

__all__ = [
    "AbcResult",
    "BootstrapResult",
    "ConfigError",
    "FittedLogistic",
    "ModelCoefficients",
    "Rule",
    "Rule2Params",
    "SelectionOutcome",
    "SubsetDiagnostic",
    "SubsetSummary",
    "TrialData",
    "__version__",
    "abc_adjust",
    "apply_rule",
    "bootstrap_correct",
    "fit_logistic",
    "generate_trial",
    "mle_selected_estimate",
    "posterior_prob_exceeds",
    "run_config_json",
    "summarize_subsets",
    "true_subset_effect",
    "true_subset_effect_quadrature",
]
