"""Solver library.

operators -> regularizers -> index functions -> ALM iteration and monitors
"""

from .alm import (
    AlmState,
    IterateRecord,
    MonitorSettings,
    StoppingRule,
    TauSchedule,
    alm_step,
    iterated_tikhonov_step,
    run,
)
from .index_functions import IndexFunction, apriori_total_time, psi_oracle
from .monitors import dual_objective
from .operators import LinearOperator, OperatorSpec, first_difference, fractional_gram_apply, make_test_operator, svd
from .regularizers import PowerSparsity, Quadratic, Regularizer, bregman

__all__ = [
    "AlmState",
    "IndexFunction",
    "IterateRecord",
    "LinearOperator",
    "MonitorSettings",
    "OperatorSpec",
    "PowerSparsity",
    "Quadratic",
    "Regularizer",
    "StoppingRule",
    "TauSchedule",
    "alm_step",
    "apriori_total_time",
    "bregman",
    "dual_objective",
    "first_difference",
    "fractional_gram_apply",
    "iterated_tikhonov_step",
    "make_test_operator",
    "psi_oracle",
    "run",
    "svd",
]
