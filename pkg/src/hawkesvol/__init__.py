"""Heston variance with compound Hawkes jumps: simulation, affine ODE bounds
and Monte Carlo checks of the associated martingale measures."""

from .model import (
    Constant,
    Exponential,
    Gamma,
    HawkesParams,
    ModelParams,
    ParameterError,
    PiecewiseConstant,
    TimeGrid,
    default_params,
    example_laws,
    load_config,
    validate,
)

__all__ = [
    "Constant",
    "Exponential",
    "Gamma",
    "HawkesParams",
    "ModelParams",
    "ParameterError",
    "PiecewiseConstant",
    "TimeGrid",
    "default_params",
    "example_laws",
    "load_config",
    "validate",
]
__version__ = "0.1.0"
