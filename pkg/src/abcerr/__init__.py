"""Likelihood-free inference where the tolerance is an explicit error model.

Rejection, weighting and MCMC samplers whose acceptance kernels are proper
error densities, together with built-in models that have analytic or
enumerable posteriors to check them against.
"""

from .core import (
    DataVector,
    DiscretePrior,
    FunctionSimulator,
    GaussianRandomWalk,
    GridRandomWalk,
    IndependentGridProposal,
    ParamVector,
    Prior,
    ProposalKernel,
    Simulator,
    SummaryFn,
    UniformPrior,
    WeightedSample,
    difference,
    identity_summary,
    make_stream,
    validate_pair,
)
from .errors import *  # noqa: F401,F403
from .estimators import (
    BayesFactor,
    EvidenceEstimate,
    bayes_factor,
    estimate_evidence,
    weighted_expectation,
    weighted_standard_error,
)
from .kernels import (
    Epanechnikov,
    Gaussian,
    Product,
    UniformBall,
    make_kernel,
    make_metric,
    max_relative_error_metric,
)
from .mcmc import ChainState, McmcConfig, run_chain, step_algorithm_c, step_algorithm_d
from .models import DiscreteOracleModel, ToyPosterior, make_model
from .rejection import RejectionConfig, run_algorithm_a, run_rejection, run_weighted

__version__ = "0.1.0"
