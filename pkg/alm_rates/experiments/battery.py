"""
Named invariant checks run by the `check` command.

Each check returns a CheckResult; none of them raises on a failed
inequality. Operator-level checks accept any LinearOperator so faulty
operators can be injected.
"""

from __future__ import annotations

import logging
import math
from typing import List, Optional, Sequence

import numpy as np

from ..core import monitors as mon
from ..core.alm import (
    MONITOR_NAMES,
    AlmState,
    MonitorSettings,
    StoppingRule,
    TauSchedule,
    alm_step,
    iterated_tikhonov_step,
    run,
)
from ..core.index_functions import (
    IndexFunction,
    check_phi_ratio_monotone,
    check_psi_growth_monotone,
    psi_oracle,
    young_gap,
)
from ..core.operators import LinearOperator, first_difference, fractional_gram_apply, svd
from ..core.regularizers import Quadratic
from ..errors import AlmRatesError
from .problems import Problem, add_noise, variational_spec, verify_variational_inequality
from .rates import CheckResult

logger = logging.getLogger(__name__)

ORACLE_TOL = 1e-6
YOUNG_TOL = 1e-9
ADJOINT_TOL = 1e-12
SEMIGROUP_TOL = 1e-10
RECONSTRUCTION_TOL = 1e-10
EQUIVALENCE_TOL = 1e-10
DUAL_LOWER_TOL = 1e-8
KKT_FACTOR = 10.0

ORACLE_GRID = [(c, p) for c in (0.5, 1.0, 2.0) for p in (0.1, 0.25, 0.5)]


def check_psi_oracle(s_grid: Optional[np.ndarray] = None) -> CheckResult:
    """Closed-form Psi against the grid supremum on a log grid of s."""
    s_grid = np.logspace(-2, 1, 7) if s_grid is None else s_grid
    worst = 0.0
    for c, p in ORACLE_GRID:
        f = IndexFunction(c=c, p=p)
        for s in s_grid:
            exact = f.psi(float(s))
            worst = max(worst, abs(psi_oracle(f, float(s)) - exact) / exact)
    return CheckResult("psi_oracle", worst <= ORACLE_TOL, worst, ORACLE_TOL)


def check_young(pairs: int = 10_000, seed: int = 0) -> CheckResult:
    """s Phi(r) <= Psi(s) + r on random (s, r), relative to 1 + s Phi(r)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for c, p in ORACLE_GRID:
        f = IndexFunction(c=c, p=p)
        s = 10.0 ** rng.uniform(-3, 3, pairs)
        r = 10.0 ** rng.uniform(-3, 3, pairs)
        gap = young_gap(f, s, r) / (1.0 + s * f.phi(r))
        worst = min(worst, float(np.min(gap)))
    return CheckResult("young_inequality", worst >= -YOUNG_TOL, worst, -YOUNG_TOL)


def check_phi_psi_equivalence(count: int = 20, seed: int = 0) -> CheckResult:
    """Phi(s)^2/s non-increasing iff t^2 Psi(2/t) non-decreasing, on random
    admissible exponents (both true) and a p > 1/2 fixture (both false)."""
    rng = np.random.default_rng(seed)
    grid = np.logspace(-3, 3, 200)
    disagreements = 0
    for _ in range(count):
        f = IndexFunction(c=float(10.0 ** rng.uniform(-1, 1)), p=float(rng.uniform(0.05, 0.5)))
        a, b = check_phi_ratio_monotone(f, grid), check_psi_growth_monotone(f, grid)
        if not (a and b):
            disagreements += 1
    fixture = IndexFunction.unchecked(1.0, 0.7)
    if check_phi_ratio_monotone(fixture, grid) or check_psi_growth_monotone(fixture, grid):
        disagreements += 1
    return CheckResult("phi_psi_equivalence", disagreements == 0, float(disagreements), 0.0)


def check_adjoint(operator: LinearOperator, pairs: int = 100, seed: int = 0) -> CheckResult:
    """|<K u, g> - <u, K* g>| relative to 1 + ||K|| ||u|| ||g||."""
    rng = np.random.default_rng(seed)
    scale = np.linalg.norm(operator.to_dense(), 2)
    worst = 0.0
    for _ in range(pairs):
        u = rng.standard_normal(operator.cols)
        g = rng.standard_normal(operator.rows)
        gap = abs(float(operator.apply(u) @ g) - float(u @ operator.adjoint_apply(g)))
        worst = max(worst, gap / (1.0 + scale * np.linalg.norm(u) * np.linalg.norm(g)))
    return CheckResult("adjoint", worst <= ADJOINT_TOL, worst, ADJOINT_TOL)


def check_svd_reconstruction(operator: LinearOperator) -> CheckResult:
    dense = operator.to_dense()
    err = float(np.linalg.norm(svd(operator).reconstruct() - dense)) / max(1.0, float(np.linalg.norm(dense)))
    return CheckResult("svd_reconstruction", err <= RECONSTRUCTION_TOL, err, RECONSTRUCTION_TOL)


def check_semigroup(operator: LinearOperator, seed: int = 0) -> CheckResult:
    """(K*K)^a (K*K)^b = (K*K)^(a+b), and (K*K)^(1/2) twice gives K^T K."""
    factorization = svd(operator)
    p = np.random.default_rng(seed).standard_normal(operator.cols)
    quarter = fractional_gram_apply(factorization, 0.25, fractional_gram_apply(factorization, 0.25, p))
    half = fractional_gram_apply(factorization, 0.5, p)
    full = fractional_gram_apply(factorization, 0.5, half)
    scale = 1.0 + float(np.linalg.norm(operator.gram)) * float(np.linalg.norm(p))
    err = max(
        float(np.linalg.norm(quarter - half)),
        float(np.linalg.norm(full - operator.adjoint_apply(operator.apply(p)))),
    ) / scale
    return CheckResult("semigroup", err <= SEMIGROUP_TOL, err, SEMIGROUP_TOL)


def check_run_monitors(
    problem: Problem,
    schedule: TauSchedule,
    stop: StoppingRule,
    delta: float,
    seed: int = 0,
    dual_samples: int = 20,
    probes: int = 10,
    inner_tol: float = 1e-10,
) -> List[CheckResult]:
    """Güler, descent-probe, KKT and dual-monotonicity checks on one run.

    Güler's inequality is re-evaluated on the stored iterates after the run.
    """
    g_obs = add_noise(problem.g, delta, seed)
    settings = MonitorSettings.default(problem.operator, problem.regularizer, dual_samples, probes, seed)
    try:
        records = run(
            problem.operator,
            problem.regularizer,
            g_obs,
            schedule,
            stop,
            MONITOR_NAMES - {"guler"},
            settings=settings,
            inner_tol=inner_tol,
        )
    except (AlmRatesError, ValueError, np.linalg.LinAlgError) as e:
        return [CheckResult("run_monitors", False, detail=f"{type(e).__name__}: {e}")]
    samples = mon.check_guler(records, g_obs, problem.operator, problem.regularizer, settings.sample_duals)
    guler = min(s.normalized for s in samples)
    ppm = max(r.monitors["ppm_violation"] for r in records)
    kkt = max(r.monitors["kkt_violation"] for r in records)
    dual = mon.dual_monotonicity_violation([r.monitors["dual_objective"] for r in records])
    kkt_limit = KKT_FACTOR * inner_tol
    return [
        CheckResult("guler", guler >= -mon.GULER_TOL, guler, -mon.GULER_TOL, f"{len(records)} iterations"),
        CheckResult("ppm", ppm <= mon.PPM_TOL, ppm, mon.PPM_TOL),
        CheckResult("kkt", kkt <= kkt_limit, kkt, kkt_limit),
        CheckResult("dual_monotone", dual <= mon.DUAL_MONOTONE_TOL, dual, mon.DUAL_MONOTONE_TOL),
    ]


def check_dual_lower_bound(
    problem: Problem, tau: float = 1.0, iterations: int = 50, inner_tol: float = 1e-10
) -> CheckResult:
    """With exact data G(p_k, g) >= -J(u†) - 1e-8 for every k."""
    floor = -problem.regularizer.value(problem.u_true)
    try:
        records = run(
            problem.operator,
            problem.regularizer,
            problem.g,
            TauSchedule.constant(tau),
            StoppingRule.fixed(iterations),
            {"dual_objective"},
            inner_tol=inner_tol,
        )
    except (AlmRatesError, np.linalg.LinAlgError) as e:
        return CheckResult("dual_lower_bound", False, detail=f"{type(e).__name__}: {e}")
    gap = min(r.monitors["dual_objective"] - floor for r in records)
    return CheckResult("dual_lower_bound", gap >= -DUAL_LOWER_TOL, gap, -DUAL_LOWER_TOL)


def check_variational_inequality(problem: Problem, samples: int = 1000, seed: int = 0) -> CheckResult:
    vispec = variational_spec(problem)
    if not vispec.certified:
        return CheckResult("variational_inequality", True, detail="skipped: constants not computable")
    report = verify_variational_inequality(problem, vispec, samples, seed)
    return CheckResult(
        "variational_inequality",
        report.passed,
        report.worst_slack,
        -1e-8 * report.worst_scale,
        f"beta={vispec.beta:g} phi=({vispec.index_function.c:.4g}, {vispec.index_function.p:.4g})",
    )


def check_iterated_tikhonov(size: int = 8, steps: int = 20, tau: float = 1.0, seed: int = 0) -> CheckResult:
    """ALM with 1/2 ||L u||^2 against the iterated Tikhonov recursion, for
    L = Id and L = first difference on a random square problem."""
    rng = np.random.default_rng(seed)
    operator = LinearOperator.dense(rng.standard_normal((size, size)) / math.sqrt(size))
    g = rng.standard_normal(size)
    worst = 0.0
    for penalty in (None, first_difference(size)):
        reg = Quadratic(penalty)
        state = AlmState.initial(operator, g)
        u_prev = np.zeros(size)
        for _ in range(steps):
            state = alm_step(state, tau, g, operator, reg)
            u_prev = iterated_tikhonov_step(u_prev, tau, g, operator, penalty)
            worst = max(worst, float(np.max(np.abs(state.u - u_prev))) / max(1.0, float(np.max(np.abs(u_prev)))))
    return CheckResult("iterated_tikhonov", worst <= EQUIVALENCE_TOL, worst, EQUIVALENCE_TOL)


def check_source_condition(problem: Problem) -> CheckResult:
    violation = problem.regularizer.kkt_violation(problem.u_true, problem.xi_true)
    detail = ""
    if problem.restricted_sigma_min is not None:
        detail = f"restricted sigma_min {problem.restricted_sigma_min:.4e}"
    return CheckResult("source_condition", violation <= 1e-10, violation, 1e-10, detail)


def run_battery(
    problem: Problem,
    schedule: TauSchedule,
    stop: StoppingRule,
    delta: float,
    *,
    seed: int = 0,
    dual_samples: int = 20,
    probes: int = 10,
    vi_samples: int = 1000,
    inner_tol: float = 1e-10,
    operator: Optional[LinearOperator] = None,
) -> List[CheckResult]:
    """The full battery; `operator` overrides the problem's operator for the
    operator-level checks."""
    op = problem.operator if operator is None else operator
    results = [
        check_psi_oracle(),
        check_young(seed=seed),
        check_phi_psi_equivalence(seed=seed),
        check_adjoint(op, seed=seed),
        check_svd_reconstruction(op),
        check_semigroup(op, seed=seed),
        check_source_condition(problem),
    ]
    results.extend(
        check_run_monitors(problem, schedule, stop, delta, seed, dual_samples, probes, inner_tol)
    )
    results.append(check_dual_lower_bound(problem, schedule.tau(1), inner_tol=inner_tol))
    results.append(check_variational_inequality(problem, vi_samples, seed))
    results.append(check_iterated_tikhonov(seed=seed))
    for result in results:
        if not result.passed:
            logger.warning("Check %s failed: value %.3e, threshold %.3e", result.name, result.value, result.threshold)
    return results


def all_passed(results: Sequence[CheckResult]) -> bool:
    return all(r.passed for r in results)
