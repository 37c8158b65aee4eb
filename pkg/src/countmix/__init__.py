"""Dirichlet-prior mixtures of Negative Binomial regressions for counts.

Fits NB and zero-inflated NB regression mixtures by multi-chain MCMC,
infers the number of occupied components from the data, and reports
prevalences, incidence rate ratios, and HPD intervals.
"""

from .distributions import (
    log_gamma,
    negbin_log_pmf,
    sample_categorical,
    sample_dirichlet,
    sample_negbin,
    zinb_log_pmf,
)
from .model import (
    CovariateColumn,
    Dataset,
    Hyperparams,
    ModelSpec,
    ParamState,
    complete_log_likelihood,
    component_mean,
    generate_synthetic,
    log_prior,
)
from .sampler import SamplerConfig, SamplerError, Trace, run_chain, run_chains
from .diagnostics import (
    ComponentSummary,
    RelabeledTrace,
    component_summary,
    ess,
    hard_assignments,
    hpdi,
    relabel,
    rhat,
)

__version__ = "0.1.0"
