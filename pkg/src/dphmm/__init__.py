"""Nonparametric Bayesian multiple change-point detection.

A left-to-right hidden Markov model whose self-transition probabilities
carry a Dirichlet-process prior, so the number of regimes is inferred
rather than fixed.  Sampling is by a change-point-localized Gibbs sweep;
regime parameters use conjugate draws for normal mean-shift, Poisson
count, and second-order autoregressive observation models; the two
concentration parameters may be held fixed, set to their per-sweep MAP
value, or sampled by Metropolis-Hastings.
"""

from .core import DphmmHyper, NonFiniteLogLik, change_points, gibbs_sweep, sequence_log_prior
from .engine import (
    ChainOutput,
    HyperMode,
    PosteriorSummary,
    ReplicationResult,
    SamplerConfig,
    SimSpec,
    model1_spec,
    model2_spec,
    replicate,
    run_chain,
    simulate,
    summarize,
)
from .hyper_learn import HyperPosteriorContext, map_update, mh_update
from .obs_models import Ar2, DataError, NormalMeanShift, PoissonCount
from .oracle import ExactPosterior, enumerate_posterior, state_marginal_tv, tv_distance
from .special_math import RngStream

__version__ = "0.1.0"

__all__ = [
    "Ar2",
    "ChainOutput",
    "DataError",
    "DphmmHyper",
    "ExactPosterior",
    "HyperMode",
    "HyperPosteriorContext",
    "NonFiniteLogLik",
    "NormalMeanShift",
    "PoissonCount",
    "PosteriorSummary",
    "ReplicationResult",
    "RngStream",
    "SamplerConfig",
    "SimSpec",
    "change_points",
    "enumerate_posterior",
    "gibbs_sweep",
    "map_update",
    "mh_update",
    "model1_spec",
    "model2_spec",
    "replicate",
    "run_chain",
    "sequence_log_prior",
    "simulate",
    "state_marginal_tv",
    "summarize",
    "tv_distance",
    "__version__",
]
