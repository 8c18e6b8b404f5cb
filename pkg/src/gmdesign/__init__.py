"""Transfer-matrix design for y = H x + n under Gaussian-mixture inputs.

The package provides the mixture data model, the exact posterior-mean
estimator with LMMSE / genie / prior baselines, a closed-form stochastic
gradient of the design objective, a projected stochastic-approximation
optimizer over common feasible sets, and a config-driven experiment
runner with CSV/SVG outputs.
"""

from .mixture import GaussianComponent, GaussianMixture, RandomStream, push_forward
from .model import LinearGMModel, Responsibilities, build_model, responsibilities
from .estimators import (
    EvaluationReport,
    analytic_gaussian_mmse,
    evaluate_designs,
    evaluate_nmse,
    evaluate_paired,
    genie_estimate,
    lmmse_estimate,
    mmse_estimate,
    prior_mean_estimate,
)
from .gradients import (
    GradientWorkspace,
    StructuredGradient,
    batch_gradient,
    commutation_matrix,
    component_posterior_norms,
    finite_difference_gradient,
    gradient_workspace,
    objective_value,
    pilot_chain,
    pilot_chain_commutation,
    precoder_chain,
    sample_gradients,
    stochastic_gradient,
    structured_gradient,
)
from .constraints import (
    Constraint,
    FactoredPrecoder,
    FrobeniusPower,
    Orthogonal,
    PilotStructure,
    Unconstrained,
)
from .optimizer import (
    OptimizerTrace,
    StepSchedule,
    StoppingRule,
    lmmse_design,
    robbins_monro,
    save_matrix,
    load_matrix,
    save_trace_csv,
)

__version__ = "0.1.0"

__all__ = [
    "GaussianComponent",
    "GaussianMixture",
    "RandomStream",
    "push_forward",
    "LinearGMModel",
    "Responsibilities",
    "build_model",
    "responsibilities",
    "EvaluationReport",
    "analytic_gaussian_mmse",
    "evaluate_designs",
    "evaluate_nmse",
    "evaluate_paired",
    "genie_estimate",
    "lmmse_estimate",
    "mmse_estimate",
    "prior_mean_estimate",
    "GradientWorkspace",
    "StructuredGradient",
    "batch_gradient",
    "commutation_matrix",
    "component_posterior_norms",
    "finite_difference_gradient",
    "gradient_workspace",
    "objective_value",
    "pilot_chain",
    "pilot_chain_commutation",
    "precoder_chain",
    "sample_gradients",
    "stochastic_gradient",
    "structured_gradient",
    "Constraint",
    "FactoredPrecoder",
    "FrobeniusPower",
    "Orthogonal",
    "PilotStructure",
    "Unconstrained",
    "OptimizerTrace",
    "StepSchedule",
    "StoppingRule",
    "lmmse_design",
    "robbins_monro",
    "save_matrix",
    "load_matrix",
    "save_trace_csv",
    "__version__",
]
