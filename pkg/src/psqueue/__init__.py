from psqueue.busy_period import BusyPeriodModel, B_gen, b_pmf, beta_gen, btilde_gen, btilde_pmf
from psqueue.distributions import (
    SpectralEngine,
    build_engine,
    delta_pmf,
    delta_pmf_quadrature,
    joint_given_n,
    kappa_given_n,
    nu_given_n,
    sojourn_tail,
)
from psqueue.errors import NumericalError, ParameterError, PSQueueError
from psqueue.model import Pmf, QueueParameters, TruncationConfig, validate_params
from psqueue.simulation import EstimateSet, TaggedRecord, estimate, simulate_tagged

__version__ = "0.1.0"

__all__ = [
    "BusyPeriodModel",
    "B_gen",
    "EstimateSet",
    "NumericalError",
    "PSQueueError",
    "ParameterError",
    "Pmf",
    "QueueParameters",
    "SpectralEngine",
    "TaggedRecord",
    "TruncationConfig",
    "b_pmf",
    "beta_gen",
    "btilde_gen",
    "btilde_pmf",
    "build_engine",
    "delta_pmf",
    "delta_pmf_quadrature",
    "estimate",
    "joint_given_n",
    "kappa_given_n",
    "nu_given_n",
    "simulate_tagged",
    "sojourn_tail",
    "validate_params",
]
