import dataclasses
import importlib
import math

import numpy as np
import pytest

from alm_rates.core.alm import StoppingKind, TauSchedule
from alm_rates.core.index_functions import IndexFunction
from alm_rates.core.operators import OperatorSpec
from alm_rates.core.regularizers import Quadratic
from alm_rates.errors import ConfigError
from alm_rates.experiments.problems import SourceSpec, build_problem, variational_spec
from alm_rates.experiments.rates import ErrorMeasure
from alm_rates.experiments.sweep import (
    RunPlan,
    iterate_rows,
    run_cell,
    solve_cell,
    summarize,
    sweep,
    validate_delta_grid,
)

# the package re-exports the sweep function under the module name
sweep_module = importlib.import_module("alm_rates.experiments.sweep")
DELTAS = list(np.geomspace(1e-1, 1e-3, 5))
MONITORS = frozenset({"dual_objective", "guler", "ppm", "kkt"})


def _plan(problem, stopping=StoppingKind.APRIORI, **kwargs):
    f = variational_spec(problem).index_function
    return RunPlan(index_function=f, stopping=stopping, monitors=MONITORS, dual_samples=5, probes=3, **kwargs)


def _rule(summary, name):
    return next(rule for rule in summary.rules if rule.name == name)


def test_validate_delta_grid():
    grid = validate_delta_grid([1e-3, 1e-1, 1e-2, 1e-4, 1e-5, 1e-2])
    np.testing.assert_allclose(grid, [1e-1, 1e-2, 1e-3, 1e-4, 1e-5])
    with pytest.raises(ConfigError, match="at least 5"):
        validate_delta_grid([1e-1, 1e-2, 1e-3, 1e-4])
    with pytest.raises(ConfigError, match="geometric"):
        validate_delta_grid([1e-1, 1e-2, 1e-3, 1e-4, 2e-5])
    with pytest.raises(ConfigError):
        validate_delta_grid([1.0, 0.1, 0.01, 0.001, 0.0])


def test_apriori_sweep(quadratic_problem):
    plan = _plan(quadratic_problem)
    records = sweep(quadratic_problem, plan, DELTAS, seeds=[0, 1])
    assert len(records) == 10
    assert [(r.delta, r.seed) for r in records] == sorted((r.delta, r.seed) for r in records)
    assert all(r.ok and r.morozov_growth_ok is None for r in records)

    summary = summarize(records, quadratic_problem, plan, ErrorMeasure.BREGMAN)
    assert summary.theoretical == 1.0
    assert summary.slope >= 0.9
    for name in ("cells_completed", "slope_bregman", "guler", "ppm", "kkt", "dual_monotone"):
        assert _rule(summary, name).passed, name
    assert {"bound_bregman", "bound_residual", "bound_dual_growth"} <= {rule.name for rule in summary.rules}


def test_morozov_sweep(quadratic_problem):
    plan = _plan(quadratic_problem, StoppingKind.MOROZOV, rho=1.5)
    records = sweep(quadratic_problem, plan, DELTAS, seeds=[0])
    assert all(r.residual <= 1.5 * r.delta for r in records)
    assert all(r.morozov_growth_ok for r in records)
    summary = summarize(records, quadratic_problem, plan, "bregman")
    assert _rule(summary, "morozov_residual").passed
    assert _rule(summary, "morozov_growth").passed
    assert any(rule.name == "bound_morozov_bregman" for rule in summary.rules)


def test_sparsity_sweep_drops_bregman_ratio(sparse_problem):
    plan = _plan(sparse_problem, schedule=TauSchedule.geometric(1.0, 1.2))
    records = sweep(sparse_problem, plan, DELTAS, seeds=[0])
    summary = summarize(records, sparse_problem, plan, ErrorMeasure.NORM)
    names = {rule.name for rule in summary.rules}
    assert "slope_norm" in names
    assert "bound_bregman" not in names
    assert _rule(summary, "kkt").passed


def test_holder_sweep_stays_within_bounds():
    spec = OperatorSpec(kind="diagonal", size=20, decay=2.0)
    problem = build_problem(spec, Quadratic(), SourceSpec.holder(0.25, seed=1, profile=0.5))
    plan = _plan(problem, schedule=TauSchedule.geometric(1.0, 1.1))
    records = sweep(problem, plan, DELTAS, seeds=[0])
    summary = summarize(records, problem, plan, ErrorMeasure.BREGMAN)
    assert summary.theoretical == pytest.approx(2.0 / 3.0)
    assert 0.4 <= summary.slope <= 1.0
    for name in ("cells_completed", "bound_bregman", "bound_residual", "bound_dual_growth", "guler", "kkt"):
        assert _rule(summary, name).passed, name


def test_threaded_sweep_matches_serial(quadratic_problem):
    plan = _plan(quadratic_problem)
    serial = sweep(quadratic_problem, plan, DELTAS, seeds=[0, 1])
    threaded = sweep(quadratic_problem, plan, DELTAS, seeds=[0, 1], threads=3)
    assert [r.as_row() for r in serial] == [r.as_row() for r in threaded]


def test_failed_cell_is_recorded(quadratic_problem):
    plan = _plan(quadratic_problem, max_outer_iterations=2)
    record = run_cell(quadratic_problem, plan, 1e-3, seed=0)
    assert not record.ok
    assert record.error.startswith("SafetyCapReached")
    assert math.isnan(record.bregman)

    full = dataclasses.replace(plan, max_outer_iterations=10**6)
    records = [record] + [run_cell(quadratic_problem, full, d, 0) for d in DELTAS]
    summary = summarize(records, quadratic_problem, plan, ErrorMeasure.BREGMAN)
    assert not _rule(summary, "cells_completed").passed
    assert not summary.passed


def test_value_error_in_a_cell_is_recorded(quadratic_problem, monkeypatch):
    def failing_solve(*args, **kwargs):
        raise ValueError("explicit schedule values must be positive")

    monkeypatch.setattr(sweep_module, "solve_cell", failing_solve)
    record = run_cell(quadratic_problem, _plan(quadratic_problem), 1e-2, seed=0)
    assert not record.ok
    assert record.error == "ValueError: explicit schedule values must be positive"


def test_different_seeds_give_different_data(quadratic_problem):
    plan = _plan(quadratic_problem)
    g0, _ = solve_cell(quadratic_problem, plan, 1e-2, seed=0)
    g1, _ = solve_cell(quadratic_problem, plan, 1e-2, seed=1)
    assert not np.array_equal(g0, g1)


def test_fixed_plan_and_iterate_rows(quadratic_problem):
    plan = RunPlan(
        index_function=IndexFunction(c=1.0, p=0.5),
        stopping=StoppingKind.FIXED,
        iterations=4,
        monitors=frozenset({"dual_objective", "kkt"}),
    )
    _, records = solve_cell(quadratic_problem, plan, 0.0, seed=0)
    rows = iterate_rows(quadratic_problem, records)
    assert [row["k"] for row in rows] == [1, 2, 3, 4]
    expected = {
        "k",
        "tau_k",
        "t_k",
        "residual",
        "J_value",
        "dual_norm",
        "bregman",
        "norm_error",
        "inner_iterations",
        "dual_objective",
        "kkt_violation",
    }
    assert set(rows[0]) == expected
    assert all(b["bregman"] <= a["bregman"] + 1e-12 for a, b in zip(rows, rows[1:]))
