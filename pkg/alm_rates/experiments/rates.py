"""
Rate fitting, theoretical rate exponents and the bound checks of the
convergence theory.

Theorems provide bounds only up to unknown constants, so those bounds are
checked through the stability of observed/bound ratios across a delta
sweep. The Morozov growth bound has no free constant and is checked
exactly.
"""

from __future__ import annotations

import dataclasses
import enum
import logging
import math
from typing import Dict, Iterable, Sequence

import numpy as np

from ..core.index_functions import IndexFunction
from ..core.regularizers import PowerSparsity, Quadratic, Regularizer
from ..errors import RateFitError
from .problems import SourceKind, SourceSpec

logger = logging.getLogger(__name__)

MIN_FIT_POINTS = 4
GROWTH_SLACK = 1e-10
DEFAULT_RATIO_LIMIT = 3.0


class ErrorMeasure(str, enum.Enum):
    BREGMAN = "bregman"
    NORM = "norm"
    DUAL_NORM = "dual_norm"

    @property
    def field(self) -> str:
        return {"bregman": "bregman", "norm": "norm_error", "dual_norm": "dual_norm"}[self.value]


@dataclasses.dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    delta_min: float
    delta_max: float
    points: int


def fit_rate(records: Iterable, field: str) -> RateFit:
    """Least-squares line through (log delta, log y).

    Records without a positive finite y (or delta) are skipped.

    Raises:
        RateFitError: fewer than four usable records.
    """
    if field in {m.value for m in ErrorMeasure}:
        field = ErrorMeasure(field).field
    pairs = []
    for rec in records:
        delta, y = getattr(rec, "delta"), getattr(rec, field)
        if y is None or not (math.isfinite(y) and y > 0 and delta > 0):
            continue
        pairs.append((delta, y))
    if len(pairs) < MIN_FIT_POINTS:
        raise RateFitError(f"rate fit of {field!r} needs {MIN_FIT_POINTS} positive points, got {len(pairs)}")
    x = np.log([d for d, _ in pairs])
    y = np.log([v for _, v in pairs])
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - fitted) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RateFit(
        slope=float(slope),
        intercept=float(intercept),
        r_squared=float(np.clip(r_squared, 0.0, 1.0)),
        delta_min=float(np.exp(x.min())),
        delta_max=float(np.exp(x.max())),
        points=len(pairs),
    )


def theoretical_exponent(
    source: SourceSpec,
    regularizer: Regularizer,
    measure: ErrorMeasure | str,
    index_function: IndexFunction | None = None,
) -> float:
    """Exponent r of the predicted rate O(delta^r).

    bregman:   1 under the standard condition, 4 nu / (1 + 2 nu) for holder
               sources with a quadratic functional
    norm:      2 nu / (q - 1 + 2 nu) for sparsity (nu = 1/2 if standard),
               half the Bregman exponent for 1/2 ||u||^2
    dual_norm: 2 p - 1 for Phi(s) = c s^p

    Raises:
        ValueError: the combination has no rate.
    """
    measure = ErrorMeasure(measure)
    nu = source.effective_nu
    holder = source.kind is SourceKind.HOLDER
    if measure is ErrorMeasure.DUAL_NORM:
        if index_function is None:
            raise ValueError("dual_norm exponent needs the index function")
        return 2.0 * index_function.p - 1.0
    if measure is ErrorMeasure.BREGMAN:
        if not holder:
            return 1.0
        if isinstance(regularizer, Quadratic):
            return 4.0 * nu / (1.0 + 2.0 * nu)
        raise ValueError("no Bregman rate for holder sources with a sparsity functional")
    if isinstance(regularizer, PowerSparsity):
        return 2.0 * nu / (regularizer.q - 1.0 + 2.0 * nu)
    if isinstance(regularizer, Quadratic) and regularizer.is_identity:
        return 2.0 * nu / (1.0 + 2.0 * nu)
    raise ValueError("no norm rate for quadratic functionals with a penalty operator")


# -----------------------------
# Bound checks
# -----------------------------


@dataclasses.dataclass(frozen=True, eq=False)
class RatioSummary:
    name: str
    ratios: np.ndarray
    limit: float = DEFAULT_RATIO_LIMIT

    @property
    def max(self) -> float:
        return float(np.max(self.ratios)) if self.ratios.size else math.nan

    @property
    def median(self) -> float:
        return float(np.median(self.ratios)) if self.ratios.size else math.nan

    @property
    def finite_positive(self) -> bool:
        return bool(self.ratios.size and np.all(np.isfinite(self.ratios)) and np.all(self.ratios > 0))

    @property
    def stable(self) -> bool:
        return self.finite_positive and self.max <= self.limit * self.median


def _completed(records: Iterable) -> list:
    return [r for r in records if getattr(r, "error", None) is None]


def check_mainthm_bound(
    records: Sequence, index_function: IndexFunction, limit: float = DEFAULT_RATIO_LIMIT
) -> Dict[str, RatioSummary]:
    """observed / bound ratios per record:

    bregman:     D / (t (Psi(16/t) + delta^2))
    residual:    ||K u - g^delta||^2 / (Psi(16/t) + delta^2)
    dual_growth: ||p||^2 / (t^2 (Psi(2/t) + delta^2))
    """
    done = _completed(records)
    f = index_function
    t = np.array([r.t_stop for r in done], dtype=float)
    delta = np.array([r.delta for r in done], dtype=float)
    main = f.psi(16.0 / t) + delta**2
    dual = f.psi(2.0 / t) + delta**2
    report = {
        "bregman": np.array([r.bregman for r in done]) / (t * main),
        "residual": np.array([r.residual for r in done]) ** 2 / main,
        "dual_growth": np.array([r.dual_norm for r in done]) ** 2 / (t**2 * dual),
    }
    return {name: RatioSummary(name, ratios, limit) for name, ratios in report.items()}


def morozov_theorem_bound(index_function: IndexFunction, rho: float, delta: float, sup_tau: float) -> float:
    """(rho+1)^2 delta^2 / Psi^-1((rho^2-1) delta^2) + (rho+1)^2 delta^2 sup tau."""
    level = index_function.psi_inv((rho**2 - 1.0) * delta**2)
    return (rho + 1.0) ** 2 * delta**2 * (1.0 / level + sup_tau)


def check_morozov_theorem_bound(
    records: Sequence,
    index_function: IndexFunction,
    rho: float,
    sup_tau: float,
    limit: float = DEFAULT_RATIO_LIMIT,
) -> RatioSummary:
    done = _completed(records)
    ratios = np.array(
        [r.bregman / morozov_theorem_bound(index_function, rho, r.delta, sup_tau) for r in done], dtype=float
    )
    return RatioSummary("morozov_bregman", ratios, limit)


def morozov_growth_bound(index_function: IndexFunction, rho: float, delta: float, tau_at_stop: float) -> float:
    """2 / Psi^-1((rho^2 - 1) delta^2) + tau_{n*}; infinite for delta = 0."""
    if delta == 0:
        return math.inf
    return 2.0 / index_function.psi_inv((rho**2 - 1.0) * delta**2) + tau_at_stop


def check_morozov_growth(record, index_function: IndexFunction, rho: float, delta: float | None = None) -> bool:
    """t_{n*} <= 2 / Psi^-1((rho^2 - 1) delta^2) + tau_{n*}, up to 1e-10 of the bound."""
    delta = record.delta if delta is None else delta
    bound = morozov_growth_bound(index_function, rho, delta, record.tau_stop)
    if math.isinf(bound):
        return True
    return record.t_stop - bound <= GROWTH_SLACK * bound


@dataclasses.dataclass(frozen=True)
class CheckResult:
    """One named pass/fail rule with the observed value and its threshold."""

    name: str
    passed: bool
    value: float = math.nan
    threshold: float = math.nan
    detail: str = ""

    def as_row(self) -> dict:
        return {
            "check": self.name,
            "status": "pass" if self.passed else "FAIL",
            "value": self.value,
            "threshold": self.threshold,
            "detail": self.detail,
        }
