import math
from types import SimpleNamespace

import numpy as np
import pytest

from alm_rates.core.index_functions import IndexFunction, apriori_total_time
from alm_rates.core.regularizers import PowerSparsity, Quadratic
from alm_rates.errors import RateFitError
from alm_rates.experiments.problems import SourceSpec
from alm_rates.experiments.rates import (
    CheckResult,
    ErrorMeasure,
    RatioSummary,
    check_mainthm_bound,
    check_morozov_growth,
    check_morozov_theorem_bound,
    fit_rate,
    morozov_growth_bound,
    theoretical_exponent,
)

DELTAS = np.geomspace(1e-1, 1e-4, 8)


def _records(values, field="bregman"):
    return [SimpleNamespace(delta=float(d), **{field: float(v)}) for d, v in zip(DELTAS, values)]


def test_fit_exact_linear():
    fit = fit_rate(_records(DELTAS), "bregman")
    assert fit.slope == pytest.approx(1.0, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.points == 8
    assert fit.delta_min == pytest.approx(1e-4)
    assert fit.delta_max == pytest.approx(1e-1)


def test_fit_power_law():
    fit = fit_rate(_records(3.0 * DELTAS ** (2.0 / 3.0), "norm_error"), "norm")
    assert fit.slope == pytest.approx(2.0 / 3.0, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-10)


def test_fit_skips_non_positive_values():
    values = DELTAS.copy()
    values[:3] = [0.0, -1.0, math.nan]
    fit = fit_rate(_records(values), "bregman")
    assert fit.points == 5
    assert fit.slope == pytest.approx(1.0, abs=1e-12)


def test_fit_needs_four_points():
    values = np.zeros(8)
    values[:3] = DELTAS[:3]
    with pytest.raises(RateFitError):
        fit_rate(_records(values), "bregman")


def test_theoretical_exponents():
    assert theoretical_exponent(SourceSpec.standard(), Quadratic(), "bregman") == 1.0
    assert theoretical_exponent(SourceSpec.holder(0.25), Quadratic(), "bregman") == pytest.approx(2.0 / 3.0)
    assert theoretical_exponent(SourceSpec.holder(0.1), Quadratic(), "bregman") == pytest.approx(1.0 / 3.0)
    assert theoretical_exponent(SourceSpec.standard(), PowerSparsity(1.0), "norm") == pytest.approx(1.0)
    assert theoretical_exponent(SourceSpec.holder(0.25), PowerSparsity(1.5), "norm") == pytest.approx(0.5)
    assert theoretical_exponent(SourceSpec.holder(0.25), Quadratic(), "norm") == pytest.approx(1.0 / 3.0)
    f = IndexFunction(c=1.0, p=0.25)
    assert theoretical_exponent(SourceSpec.standard(), Quadratic(), ErrorMeasure.DUAL_NORM, f) == pytest.approx(-0.5)


def test_theoretical_exponent_without_rate():
    with pytest.raises(ValueError):
        theoretical_exponent(SourceSpec.holder(0.25), PowerSparsity(1.0), "bregman")
    with pytest.raises(ValueError):
        theoretical_exponent(SourceSpec.standard(), Quadratic(), "dual_norm")


def _mainthm_records(f, scale=1.0):
    out = []
    for d in DELTAS:
        t = apriori_total_time(f, d)
        main = f.psi(16.0 / t) + d**2
        dual = f.psi(2.0 / t) + d**2
        out.append(
            SimpleNamespace(
                delta=d,
                t_stop=t,
                bregman=scale * t * main,
                residual=math.sqrt(0.5 * main),
                dual_norm=math.sqrt(2.0 * t**2 * dual),
            )
        )
    return out


def test_mainthm_ratios_stable_for_exact_bounds():
    f = IndexFunction(c=1.0, p=0.5)
    report = check_mainthm_bound(_mainthm_records(f), f)
    assert set(report) == {"bregman", "residual", "dual_growth"}
    np.testing.assert_allclose(report["bregman"].ratios, 1.0)
    np.testing.assert_allclose(report["residual"].ratios, 0.5)
    np.testing.assert_allclose(report["dual_growth"].ratios, 2.0)
    assert all(summary.stable for summary in report.values())


def test_ratio_summary_flags_drift():
    assert not RatioSummary("x", np.array([1.0, 1.0, 1.0, 10.0, 1.0])).stable
    assert not RatioSummary("x", np.array([1.0, 0.0, 1.0])).stable
    assert not RatioSummary("x", np.array([])).stable
    assert RatioSummary("x", np.array([1.0, 2.0, 2.5])).stable


def test_mainthm_ignores_failed_cells():
    f = IndexFunction(c=1.0, p=0.5)
    records = _mainthm_records(f)
    records.append(SimpleNamespace(delta=1e-5, t_stop=math.nan, error="InnerSolverError"))
    assert check_mainthm_bound(records, f)["bregman"].ratios.size == len(DELTAS)


def test_morozov_growth_single_step():
    f = IndexFunction(c=1.0, p=0.5)
    record = SimpleNamespace(delta=1e-2, t_stop=1.0, tau_stop=1.0)
    assert check_morozov_growth(record, f, rho=2.0)
    assert morozov_growth_bound(f, 2.0, 0.0, 1.0) == math.inf


def test_morozov_growth_violation():
    f = IndexFunction(c=1.0, p=0.5)
    bound = morozov_growth_bound(f, 2.0, 1e-2, 1.0)
    assert bound == pytest.approx(2.0 / (2.0 * math.sqrt(3.0) * 1e-2) + 1.0)
    assert not check_morozov_growth(SimpleNamespace(delta=1e-2, t_stop=1.01 * bound, tau_stop=1.0), f, 2.0)


def test_morozov_theorem_ratios():
    f = IndexFunction(c=1.0, p=0.5)
    records = [SimpleNamespace(delta=d, bregman=d) for d in DELTAS]
    summary = check_morozov_theorem_bound(records, f, rho=1.5, sup_tau=1.0)
    assert summary.name == "morozov_bregman"
    assert summary.finite_positive


def test_check_result_row():
    row = CheckResult("adjoint", False, 1e-3, 1e-12, "corrupted").as_row()
    assert row == {"check": "adjoint", "status": "FAIL", "value": 1e-3, "threshold": 1e-12, "detail": "corrupted"}
    assert CheckResult("ppm", True).as_row()["status"] == "pass"
