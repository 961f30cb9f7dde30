"""Bayesian event-duration prediction: forward model, prior recovery,
limiting-case scenarios, forecast ingestion and case-count analysis."""

__version__ = "0.1.0"

from .duration_model import (  # noqa: E402
    DecisionRule,
    EmptyPosteriorError,
    LikelihoodSpec,
    PosteriorResult,
    SampledPrior,
    posterior,
    predict,
    sample_poisson_prior,
)
from .prior_recovery import (  # noqa: E402
    NoCandidateError,
    RecoveredPrior,
    RecoveryFailure,
    RecoveryTable,
    build_table,
    recover_prior,
    recover_trajectory,
)
