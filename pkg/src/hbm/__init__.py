"""Human behavior modeling: recoverable LQR task objectives plus learned
state-dependent variability, with trajectory prediction and confidence bounds."""

from .lti import (
    DemonstrationSet,
    LtiSystem,
    Trajectory,
    is_stabilizing,
    lqr_gain,
    pseudo_inverse,
    rollout,
    solve_dare,
    spectral_radius,
)
from .ioc import (
    GainEstimate,
    TaskObjective,
    estimate_gain,
    evaluate_cost,
    min_alpha_oracle,
    recover_objective,
)

__all__ = [
    "DemonstrationSet",
    "GainEstimate",
    "LtiSystem",
    "TaskObjective",
    "Trajectory",
    "estimate_gain",
    "evaluate_cost",
    "is_stabilizing",
    "lqr_gain",
    "min_alpha_oracle",
    "pseudo_inverse",
    "recover_objective",
    "rollout",
    "solve_dare",
    "spectral_radius",
]
