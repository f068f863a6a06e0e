"""Approximate Bayesian computation with optimal-transport discrepancies."""

from .abc import (
    AbcRun,
    DeviationMeasure,
    RejectionABC,
    abc_posterior_prob,
    abc_rejection,
    deviation_from_discrepancy,
    epsilon_from_quantile,
)
from .asymptotics import (
    AsymptoticEstimates,
    ModulusSpec,
    TransportProfile,
    convergence_experiment,
    estimate_mu_theta,
    estimate_T_map,
    estimate_tau_sigma,
    lower_bound_report,
)
from .exceptions import HypothesisUnmet, InvalidInput, NoPosterior, TooLarge, Unsupported
from .measures import EmpiricalMeasure, SampleSpaceConfig, cdf, empirical_from_samples, quantile
from .models import Prior, make_model, normal_true_posterior, simulate_pref_attach
from .transport import (
    CostFunction,
    Discrepancy,
    DiscrepancyTransformer,
    DiscreteCoupling,
    kantorovich_discrete,
    radon_distance,
    sliced_wasserstein,
    wasserstein_1d,
    wasserstein_p,
)

__version__ = "0.1.0"
