"""GP/EI Bayesian optimization and restart strategies."""

from .bo import (
    BoTrace,
    Dim,
    Proposal,
    RestartPolicy,
    SearchError,
    SearchSpace,
    bo_minimize,
    propose_next,
    stalled,
)
from .gp import (
    GpError,
    GpSurrogate,
    ei_closed_form,
    expected_improvement,
    gp_extend,
    gp_fit,
    gp_fit_fixed,
    gp_posterior,
    se_kernel,
)
from .restarts import (
    BenchmarkResult,
    basin_fraction,
    convex,
    hill_climb,
    mc_convergence_probability,
    plateau,
    restart_benchmark,
    two_basin,
)

__all__ = [
    "BenchmarkResult", "BoTrace", "Dim", "GpError", "GpSurrogate", "Proposal", "RestartPolicy",
    "SearchError", "SearchSpace", "basin_fraction", "bo_minimize", "convex", "ei_closed_form",
    "expected_improvement", "gp_extend", "gp_fit", "gp_fit_fixed", "gp_posterior", "hill_climb",
    "mc_convergence_probability", "plateau", "propose_next", "restart_benchmark", "se_kernel",
    "stalled", "two_basin",
]
