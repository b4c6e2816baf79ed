"""Majorization-minimization with duality-gap-controlled inexact inference."""

from .bounds import BoundProblem, ToyHQProblem, UnsupportedBound
from .drivers import (
    ReGeMMConfig,
    StochasticSuDeMMConfig,
    SuDeMMConfig,
    assert_gradient_regemm_bound,
    run_alternating_baseline,
    run_constant_memory_regemm,
    run_regemm,
    run_stochastic_sudemm,
    run_sudemm,
)
from .kernels import RobustKernel
from .schedules import ConstantSchedule, PowerSchedule, validate_schedules
from .trace import RunTrace, TraceRecord

__version__ = "0.1.0"

__all__ = [
    "BoundProblem",
    "ToyHQProblem",
    "UnsupportedBound",
    "RobustKernel",
    "RunTrace",
    "TraceRecord",
    "ReGeMMConfig",
    "SuDeMMConfig",
    "StochasticSuDeMMConfig",
    "run_regemm",
    "run_constant_memory_regemm",
    "run_sudemm",
    "run_stochastic_sudemm",
    "run_alternating_baseline",
    "assert_gradient_regemm_bound",
    "ConstantSchedule",
    "PowerSchedule",
    "validate_schedules",
]
