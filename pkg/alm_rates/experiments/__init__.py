"""Synthetic problems, delta sweeps, rate fits and the invariant battery."""

from .problems import SourceSpec, add_noise, build_problem, variational_spec, verify_variational_inequality
from .rates import check_mainthm_bound, check_morozov_growth, fit_rate, theoretical_exponent
from .sweep import RunPlan, RunRecord, summarize, sweep

__all__ = [
    "RunPlan",
    "RunRecord",
    "SourceSpec",
    "add_noise",
    "build_problem",
    "check_mainthm_bound",
    "check_morozov_growth",
    "fit_rate",
    "summarize",
    "sweep",
    "theoretical_exponent",
    "variational_spec",
    "verify_variational_inequality",
]
