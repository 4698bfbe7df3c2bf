"""Annealing simulators and the success-probability protocol."""
from ..model import enumerate_ground_states
from .exact import ExactResult, ExactRunConfig, IntegratorError, exact_sampler, run_exact
from .sampling import SamplerProtocol, SuccessEstimate, estimate_success, wilson_interval
from .svmc import SVMCConfig, run_svmc, simulated_annealing_reference, svmc_batch, svmc_sampler

__all__ = [
    "ExactResult", "ExactRunConfig", "IntegratorError", "exact_sampler", "run_exact",
    "SamplerProtocol", "SuccessEstimate", "estimate_success", "wilson_interval",
    "SVMCConfig", "run_svmc", "simulated_annealing_reference", "svmc_batch", "svmc_sampler",
    "enumerate_ground_states",
]
