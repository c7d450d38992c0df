"""
Delta sweeps: one ALM run per (delta, seed) cell, summarized into rate fits
and pass/fail acceptance rules.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import logging
import math
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from ..config import INNER_TOL, MAX_INNER_ITERATIONS, MAX_OUTER_ITERATIONS
from ..core.alm import IterateRecord, MonitorSettings, StoppingKind, StoppingRule, TauSchedule, run
from ..core.index_functions import IndexFunction, apriori_total_time
from ..core.monitors import GULER_TOL, PPM_TOL, DUAL_MONOTONE_TOL, dual_monotonicity_violation
from ..core.regularizers import PowerSparsity
from ..errors import AlmRatesError, ConfigError
from .problems import Problem, add_noise
from .rates import (
    CheckResult,
    DEFAULT_RATIO_LIMIT,
    ErrorMeasure,
    check_mainthm_bound,
    check_morozov_growth,
    check_morozov_theorem_bound,
    fit_rate,
    theoretical_exponent,
)

logger = logging.getLogger(__name__)

MIN_GRID_POINTS = 5
GRID_TOL = 1e-6
KKT_FACTOR = 10.0


@dataclasses.dataclass(frozen=True, eq=False)
class RunPlan:
    """Everything a cell needs besides the problem, delta and seed."""

    index_function: IndexFunction
    stopping: StoppingKind
    schedule: TauSchedule = dataclasses.field(default_factory=TauSchedule.constant)
    rho: float = math.nan
    iterations: int = 0
    monitors: FrozenSet[str] = frozenset()
    dual_samples: int = 20
    probes: int = 10
    inner_tol: float = INNER_TOL
    max_inner_iterations: int = MAX_INNER_ITERATIONS
    max_outer_iterations: int = MAX_OUTER_ITERATIONS

    def stopping_rule(self, delta: float) -> StoppingRule:
        if self.stopping is StoppingKind.APRIORI:
            return StoppingRule.apriori(apriori_total_time(self.index_function, delta))
        if self.stopping is StoppingKind.MOROZOV:
            return StoppingRule.morozov(self.rho, delta, self.index_function)
        return StoppingRule.fixed(self.iterations)

    def monitor_settings(self, problem: Problem, seed: int) -> Optional[MonitorSettings]:
        if not self.monitors & {"guler", "ppm"}:
            return None
        return MonitorSettings.default(
            problem.operator, problem.regularizer, self.dual_samples, self.probes, seed=seed
        )


@dataclasses.dataclass(frozen=True)
class RunRecord:
    delta: float
    seed: int
    stopping: str
    n_stop: int = 0
    t_stop: float = math.nan
    tau_stop: float = math.nan
    residual: float = math.nan
    bregman: float = math.nan
    norm_error: float = math.nan
    dual_norm: float = math.nan
    morozov_growth_ok: Optional[bool] = None
    guler_min_slack: float = math.nan
    ppm_max_violation: float = math.nan
    kkt_max_violation: float = math.nan
    dual_monotone_violation: float = math.nan
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def as_row(self) -> dict:
        return dataclasses.asdict(self)


def solve_cell(
    problem: Problem, plan: RunPlan, delta: float, seed: int
) -> Tuple[np.ndarray, List[IterateRecord]]:
    """Noisy data and the iterate records of one run."""
    g_obs = add_noise(problem.g, delta, seed)
    records = run(
        problem.operator,
        problem.regularizer,
        g_obs,
        plan.schedule,
        plan.stopping_rule(delta),
        plan.monitors,
        settings=plan.monitor_settings(problem, seed),
        inner_tol=plan.inner_tol,
        max_inner_iterations=plan.max_inner_iterations,
        max_outer_iterations=plan.max_outer_iterations,
    )
    return g_obs, records


def _monitor_summary(records: Sequence[IterateRecord]) -> Dict[str, float]:
    def column(name: str) -> List[float]:
        return [r.monitors[name] for r in records if name in r.monitors]

    out = {}
    if guler := column("guler_slack"):
        out["guler_min_slack"] = min(guler)
    if ppm := column("ppm_violation"):
        out["ppm_max_violation"] = max(ppm)
    if kkt := column("kkt_violation"):
        out["kkt_max_violation"] = max(kkt)
    if dual := column("dual_objective"):
        out["dual_monotone_violation"] = dual_monotonicity_violation(dual)
    return out


def run_cell(problem: Problem, plan: RunPlan, delta: float, seed: int) -> RunRecord:
    """One sweep cell; solver failures are recorded instead of raised."""
    try:
        _, records = solve_cell(problem, plan, delta, seed)
    except (AlmRatesError, ValueError, np.linalg.LinAlgError) as e:
        logger.warning("Cell delta=%.3e seed=%d failed: %s", delta, seed, e)
        return RunRecord(delta=delta, seed=seed, stopping=plan.stopping.value, error=f"{type(e).__name__}: {e}")
    last = records[-1]
    record = RunRecord(
        delta=delta,
        seed=seed,
        stopping=plan.stopping.value,
        n_stop=last.k,
        t_stop=last.t,
        tau_stop=last.tau,
        residual=last.residual,
        bregman=problem.bregman_to_truth(last.u),
        norm_error=problem.norm_error(last.u),
        dual_norm=float(np.linalg.norm(last.p)),
        **_monitor_summary(records),
    )
    if plan.stopping is StoppingKind.MOROZOV:
        record = dataclasses.replace(
            record, morozov_growth_ok=check_morozov_growth(record, plan.index_function, plan.rho)
        )
    logger.info(
        "Cell delta=%.3e seed=%d: n=%d t=%.4e bregman=%.4e", delta, seed, record.n_stop, record.t_stop, record.bregman
    )
    return record


def validate_delta_grid(deltas: Sequence[float]) -> np.ndarray:
    """Distinct levels, largest first.

    Raises:
        ConfigError: fewer than MIN_GRID_POINTS positive levels, or not geometric.
    """
    grid = np.unique(np.asarray(deltas, dtype=float))[::-1]
    if grid.size < MIN_GRID_POINTS or np.any(grid <= 0):
        raise ConfigError(
            [f"a sweep needs at least {MIN_GRID_POINTS} distinct positive noise levels, got {grid.size}"]
        )
    steps = np.diff(np.log(grid))
    if np.max(np.abs(steps - steps.mean())) > GRID_TOL * abs(steps.mean()):
        raise ConfigError(["sweep noise levels must form a geometric grid"])
    return grid


def sweep(
    problem: Problem, plan: RunPlan, deltas: Sequence[float], seeds: Sequence[int], threads: int = 1
) -> List[RunRecord]:
    """One RunRecord per (delta, seed), sorted by (delta, seed)."""
    grid = validate_delta_grid(deltas)
    if not seeds:
        raise ValueError("a sweep needs at least one seed")
    cells = [(float(d), int(s)) for d in grid for s in seeds]
    logger.info("Sweeping %d cells on %d thread(s)", len(cells), threads)
    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(lambda cell: run_cell(problem, plan, *cell), cells))
    else:
        records = [run_cell(problem, plan, d, s) for d, s in cells]
    return sorted(records, key=lambda r: (r.delta, r.seed))


@dataclasses.dataclass(frozen=True)
class SweepSummary:
    measure: ErrorMeasure
    slope: float
    r_squared: float
    theoretical: float
    rules: Tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(rule.passed for rule in self.rules)


def summarize(
    records: Sequence[RunRecord],
    problem: Problem,
    plan: RunPlan,
    measure: ErrorMeasure,
    ratio_limit: float = DEFAULT_RATIO_LIMIT,
    slope_tolerance: float = 0.1,
) -> SweepSummary:
    """Rate fit plus the acceptance rules of a sweep."""
    measure = ErrorMeasure(measure)
    rules: List[CheckResult] = []
    failed = [r for r in records if not r.ok]
    rules.append(CheckResult("cells_completed", not failed, float(len(records) - len(failed)), float(len(records))))
    done = [r for r in records if r.ok]

    theoretical = theoretical_exponent(problem.source, problem.regularizer, measure, plan.index_function)
    slope = r_squared = math.nan
    try:
        fit = fit_rate(done, measure.value)
        slope, r_squared = fit.slope, fit.r_squared
        rules.append(
            CheckResult(
                f"slope_{measure.value}",
                slope >= theoretical - slope_tolerance,
                slope,
                theoretical - slope_tolerance,
                f"r2={r_squared:.4f} over {fit.points} points",
            )
        )
    except AlmRatesError as e:
        rules.append(CheckResult(f"slope_{measure.value}", False, detail=str(e)))

    if plan.stopping is StoppingKind.MOROZOV:
        worst = max((r.residual / (plan.rho * r.delta) for r in done), default=math.nan)
        rules.append(CheckResult("morozov_residual", bool(done) and worst <= 1.0, worst, 1.0))
        growth_ok = [bool(r.morozov_growth_ok) for r in done]
        rules.append(CheckResult("morozov_growth", bool(done) and all(growth_ok), float(sum(growth_ok)), len(done)))
        ratios = [
            check_morozov_theorem_bound(done, plan.index_function, plan.rho, plan.schedule.sup_tau, ratio_limit)
        ]
    else:
        by_name = check_mainthm_bound(done, plan.index_function, ratio_limit)
        # a sparse iterate on the true support with the right signs has zero Bregman distance
        if isinstance(problem.regularizer, PowerSparsity):
            by_name.pop("bregman")
        ratios = list(by_name.values())
    for summary in ratios:
        rules.append(
            CheckResult(
                f"bound_{summary.name}",
                summary.stable,
                summary.max / summary.median if summary.finite_positive else math.nan,
                ratio_limit,
                f"median ratio {summary.median:.4e}",
            )
        )

    rules.extend(_monitor_rules(done, plan))
    return SweepSummary(measure, slope, r_squared, theoretical, tuple(rules))


def _monitor_rules(done: Sequence[RunRecord], plan: RunPlan) -> List[CheckResult]:
    rules = []

    def worst(field: str, pick) -> float:
        values = [getattr(r, field) for r in done if not math.isnan(getattr(r, field))]
        return pick(values) if values else math.nan

    if "guler" in plan.monitors:
        value = worst("guler_min_slack", min)
        rules.append(CheckResult("guler", value >= -GULER_TOL, value, -GULER_TOL))
    if "ppm" in plan.monitors:
        value = worst("ppm_max_violation", max)
        rules.append(CheckResult("ppm", value <= PPM_TOL, value, PPM_TOL))
    if "kkt" in plan.monitors:
        limit = KKT_FACTOR * plan.inner_tol
        value = worst("kkt_max_violation", max)
        rules.append(CheckResult("kkt", value <= limit, value, limit))
    if "dual_objective" in plan.monitors:
        value = worst("dual_monotone_violation", max)
        rules.append(CheckResult("dual_monotone", value <= DUAL_MONOTONE_TOL, value, DUAL_MONOTONE_TOL))
    return rules


def iterate_rows(problem: Problem, records: Sequence[IterateRecord]) -> List[dict]:
    """Per-iteration table of a single run."""
    rows = []
    for rec in records:
        row = {
            "k": rec.k,
            "tau_k": rec.tau,
            "t_k": rec.t,
            "residual": rec.residual,
            "J_value": rec.state.j_value,
            "dual_norm": float(np.linalg.norm(rec.p)),
            "bregman": problem.bregman_to_truth(rec.u),
            "norm_error": problem.norm_error(rec.u),
            "inner_iterations": rec.state.inner_iterations,
        }
        row.update(rec.monitors)
        rows.append(row)
    return rows
