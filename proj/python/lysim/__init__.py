"""Healthy/infected interacting branching process: simulator, oracle, estimators."""

from ._core import (
    InvalidLaw,
    InvalidParams,
    __version__,
    absorption_probabilities,
    derive,
    estimate_eta,
    estimate_t_union,
    estimate_zeta,
    extinction_fixed_point,
    run_config,
    simulate,
    stream_seed,
    transient_distribution,
    x_prime_law,
)

__all__ = [
    "InvalidLaw",
    "InvalidParams",
    "__version__",
    "absorption_probabilities",
    "derive",
    "estimate_eta",
    "estimate_t_union",
    "estimate_zeta",
    "extinction_fixed_point",
    "run_config",
    "simulate",
    "stream_seed",
    "transient_distribution",
    "x_prime_law",
]
