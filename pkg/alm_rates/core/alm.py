"""
Augmented Lagrangian (Bregman) iteration for linear inverse problems.

    u_k = argmin_u  tau_k/2 ||K u - g||^2 + J(u) - <p_{k-1}, K u - g>
    p_k = p_{k-1} + tau_k (g - K u_k),     p_0 = 0,   t_k = t_{k-1} + tau_k

Each primal step is solved as a Tikhonov problem with shifted data
b_k = g + p_{k-1} / tau_k. Quadratic functionals use a Cholesky solve, the
sparsity functionals an accelerated proximal gradient method.
"""

from __future__ import annotations

import abc
import dataclasses
import enum
import logging
import math
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg as sla

from ..config import INNER_TOL, MAX_INNER_ITERATIONS, MAX_OUTER_ITERATIONS
from ..errors import DimensionMismatchError, InnerSolverError, SafetyCapReached
from . import monitors as mon
from .index_functions import IndexFunction
from .operators import LinearOperator
from .regularizers import PowerSparsity, Quadratic, Regularizer

logger = logging.getLogger(__name__)

# Morozov runs abort once t_n exceeds this multiple of the growth bound
GROWTH_ABORT_FACTOR = 100.0

MONITOR_NAMES = frozenset({"dual_objective", "guler", "ppm", "kkt"})


# -----------------------------
# Step sizes and stopping
# -----------------------------


class ScheduleKind(str, enum.Enum):
    CONSTANT = "constant"
    EXPLICIT = "explicit"
    GEOMETRIC = "geometric"


@dataclasses.dataclass(frozen=True)
class TauSchedule:
    """tau_k for k = 1, 2, ...

    Explicit schedules repeat their last entry once exhausted. Geometric
    schedules tau0 * ratio^(k-1) with ratio > 1 are unbounded.
    """

    kind: ScheduleKind
    tau0: float = 1.0
    ratio: float = 1.0
    values: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind is ScheduleKind.EXPLICIT:
            if not self.values or any(not v > 0 for v in self.values):
                raise ValueError("explicit schedule needs a non-empty list of positive step sizes")
        elif not self.tau0 > 0:
            raise ValueError(f"tau0 must be positive, got {self.tau0}")
        if self.kind is ScheduleKind.GEOMETRIC and not self.ratio >= 1.0:
            raise ValueError(f"geometric ratio must be >= 1, got {self.ratio}")

    @classmethod
    def constant(cls, tau0: float = 1.0) -> "TauSchedule":
        return cls(ScheduleKind.CONSTANT, tau0=tau0)

    @classmethod
    def explicit(cls, values: Iterable[float]) -> "TauSchedule":
        return cls(ScheduleKind.EXPLICIT, values=tuple(float(v) for v in values))

    @classmethod
    def geometric(cls, tau0: float, ratio: float) -> "TauSchedule":
        return cls(ScheduleKind.GEOMETRIC, tau0=tau0, ratio=ratio)

    def tau(self, k: int) -> float:
        if k < 1:
            raise ValueError(f"step sizes are indexed from 1, got {k}")
        if self.kind is ScheduleKind.CONSTANT:
            return self.tau0
        if self.kind is ScheduleKind.EXPLICIT:
            return self.values[min(k, len(self.values)) - 1]
        return self.tau0 * self.ratio ** (k - 1)

    @property
    def is_bounded(self) -> bool:
        return self.kind is not ScheduleKind.GEOMETRIC or self.ratio == 1.0

    @property
    def sup_tau(self) -> float:
        if not self.is_bounded:
            return math.inf
        if self.kind is ScheduleKind.EXPLICIT:
            return max(self.values)
        return self.tau0


class StoppingKind(str, enum.Enum):
    APRIORI = "apriori"
    MOROZOV = "morozov"
    FIXED = "fixed"


@dataclasses.dataclass(frozen=True)
class StoppingRule:
    kind: StoppingKind
    target_time: float = math.inf
    rho: float = math.nan
    delta: float = math.nan
    iterations: int = 0
    # enables the Morozov growth-bound abort
    index_function: Optional[IndexFunction] = None

    def __post_init__(self):
        if self.kind is StoppingKind.APRIORI and not (0 < self.target_time < math.inf):
            raise ValueError(f"a-priori target time must be positive and finite, got {self.target_time}")
        if self.kind is StoppingKind.MOROZOV:
            if not self.rho > 1:
                raise ValueError("morozov requires rho > 1")
            if not self.delta > 0:
                raise ValueError(f"morozov requires delta > 0, got {self.delta}")
        if self.kind is StoppingKind.FIXED and self.iterations < 1:
            raise ValueError(f"fixed stopping needs at least one iteration, got {self.iterations}")

    @classmethod
    def apriori(cls, target_time: float) -> "StoppingRule":
        return cls(StoppingKind.APRIORI, target_time=target_time)

    @classmethod
    def morozov(
        cls, rho: float, delta: float, index_function: Optional[IndexFunction] = None
    ) -> "StoppingRule":
        return cls(StoppingKind.MOROZOV, rho=rho, delta=delta, index_function=index_function)

    @classmethod
    def fixed(cls, iterations: int) -> "StoppingRule":
        return cls(StoppingKind.FIXED, iterations=iterations)

    def reached(self, state: "AlmState") -> bool:
        if self.kind is StoppingKind.APRIORI:
            return state.t >= self.target_time
        if self.kind is StoppingKind.MOROZOV:
            return state.residual <= self.rho * self.delta
        return state.k >= self.iterations

    def growth_bound(self, schedule: TauSchedule) -> float:
        """2 / Psi^-1((rho^2 - 1) delta^2) + sup tau; inf without an index function.

        The bound holds with tau at the stopping index. That index is unknown
        before the run, so sup tau stands in for it and the abort threshold
        is conservative.
        """
        if self.kind is not StoppingKind.MOROZOV or self.index_function is None:
            return math.inf
        level = self.index_function.psi_inv((self.rho**2 - 1.0) * self.delta**2)
        return 2.0 / level + schedule.sup_tau


# -----------------------------
# Iterates
# -----------------------------


@dataclasses.dataclass(frozen=True, eq=False)
class AlmState:
    k: int
    u: np.ndarray
    p: np.ndarray
    t: float
    residual: float
    j_value: float
    inner_iterations: int = 0

    @classmethod
    def initial(cls, operator: LinearOperator, g_obs: np.ndarray) -> "AlmState":
        return cls(
            k=0,
            u=np.zeros(operator.cols),
            p=np.zeros(operator.rows),
            t=0.0,
            residual=float(np.linalg.norm(g_obs)),
            j_value=0.0,
        )


@dataclasses.dataclass(frozen=True, eq=False)
class IterateRecord:
    state: AlmState
    tau: float
    monitors: Dict[str, float] = dataclasses.field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.state.k

    @property
    def u(self) -> np.ndarray:
        return self.state.u

    @property
    def p(self) -> np.ndarray:
        return self.state.p

    @property
    def t(self) -> float:
        return self.state.t

    @property
    def residual(self) -> float:
        return self.state.residual


# -----------------------------
# Inner solvers
# -----------------------------


@dataclasses.dataclass(frozen=True, eq=False)
class InnerResult:
    u: np.ndarray
    iterations: int
    achieved: float


class InnerSolver(abc.ABC):
    """Solves argmin_u tau/2 ||K u - b||^2 + J(u)."""

    def __init__(self, operator: LinearOperator, regularizer: Regularizer):
        self.operator = operator
        self.regularizer = regularizer

    @abc.abstractmethod
    def solve(self, tau: float, b: np.ndarray, warm_start: Optional[np.ndarray] = None) -> InnerResult:
        ...


class CholeskySolver(InnerSolver):
    """(tau K^T K + L^T L) u = tau K^T b, refactored only when tau changes."""

    def __init__(self, operator: LinearOperator, regularizer: Quadratic):
        super().__init__(operator, regularizer)
        self._penalty_gram = regularizer.gram_matrix(operator.cols)
        self._tau: Optional[float] = None
        self._factor = None

    def _factorize(self, tau: float):
        if self._tau != tau:
            self._factor = sla.cho_factor(tau * self.operator.gram + self._penalty_gram)
            self._tau = tau
        return self._factor

    def solve(self, tau: float, b: np.ndarray, warm_start: Optional[np.ndarray] = None) -> InnerResult:
        factor = self._factorize(tau)
        u = sla.cho_solve(factor, tau * self.operator.adjoint_apply(b))
        return InnerResult(u=u, iterations=1, achieved=0.0)


class ProximalGradientSolver(InnerSolver):
    """FISTA with gradient-based adaptive restart.

    Step size 1 / (tau ||K||^2). Stops when the prox-gradient mapping
    ||y - x+|| / step drops to `tol` and returns x+.
    """

    def __init__(
        self,
        operator: LinearOperator,
        regularizer: Regularizer,
        tol: float = INNER_TOL,
        max_iterations: int = MAX_INNER_ITERATIONS,
    ):
        super().__init__(operator, regularizer)
        self.tol = tol
        self.max_iterations = max_iterations
        self._lipschitz = operator.spectral_norm**2

    def solve(self, tau: float, b: np.ndarray, warm_start: Optional[np.ndarray] = None) -> InnerResult:
        op = self.operator
        step = 1.0 / (tau * self._lipschitz)
        x = np.zeros(op.cols) if warm_start is None else np.array(warm_start, dtype=float)
        y = x.copy()
        momentum = 1.0
        mapping = math.inf
        for it in range(1, self.max_iterations + 1):
            grad = tau * op.adjoint_apply(op.apply(y) - b)
            x_next = self.regularizer.prox(step, y - step * grad)
            mapping = float(np.linalg.norm(y - x_next)) / step
            if mapping <= self.tol:
                return InnerResult(u=x_next, iterations=it, achieved=mapping)
            if float((y - x_next) @ (x_next - x)) > 0:
                momentum = 1.0
                y = x_next.copy()
            else:
                momentum_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * momentum**2))
                y = x_next + ((momentum - 1.0) / momentum_next) * (x_next - x)
                momentum = momentum_next
            x = x_next
        raise InnerSolverError(
            f"proximal gradient stopped at mapping norm {mapping:.3e} > {self.tol:.1e}",
            achieved=mapping,
            iterations=self.max_iterations,
        )


def make_inner_solver(
    operator: LinearOperator,
    regularizer: Regularizer,
    tol: float = INNER_TOL,
    max_iterations: int = MAX_INNER_ITERATIONS,
) -> InnerSolver:
    if isinstance(regularizer, Quadratic):
        return CholeskySolver(operator, regularizer)
    if isinstance(regularizer, PowerSparsity):
        return ProximalGradientSolver(operator, regularizer, tol, max_iterations)
    raise TypeError(f"no inner solver for {type(regularizer).__name__}")


# -----------------------------
# Outer iteration
# -----------------------------


def alm_step(
    state: AlmState,
    tau: float,
    g_obs: np.ndarray,
    operator: LinearOperator,
    regularizer: Regularizer,
    inner_tol: float = INNER_TOL,
    *,
    solver: Optional[InnerSolver] = None,
) -> AlmState:
    """One primal solve and dual update."""
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    g_obs = np.asarray(g_obs, dtype=float)
    if g_obs.shape != (operator.rows,) or state.p.shape != (operator.rows,):
        raise DimensionMismatchError(
            f"data and dual must have length {operator.rows}, got {g_obs.shape} and {state.p.shape}"
        )
    if solver is None:
        solver = make_inner_solver(operator, regularizer, inner_tol)
    result = solver.solve(tau, g_obs + state.p / tau, warm_start=state.u)
    misfit = g_obs - operator.apply(result.u)
    return AlmState(
        k=state.k + 1,
        u=result.u,
        p=state.p + tau * misfit,
        t=state.t + tau,
        residual=float(np.linalg.norm(misfit)),
        j_value=regularizer.value(result.u),
        inner_iterations=result.iterations,
    )


@dataclasses.dataclass(frozen=True, eq=False)
class MonitorSettings:
    sample_duals: Tuple[np.ndarray, ...] = ()
    probes: Tuple[np.ndarray, ...] = ()

    @classmethod
    def default(
        cls,
        operator: LinearOperator,
        regularizer: Regularizer,
        dual_samples: int = 20,
        probes: int = 10,
        seed: int = 0,
    ) -> "MonitorSettings":
        return cls(
            sample_duals=tuple(mon.random_sample_duals(operator, regularizer, dual_samples, seed)),
            probes=tuple(mon.random_probes(operator.rows, probes, seed + 1)),
        )


def run(
    operator: LinearOperator,
    regularizer: Regularizer,
    g_obs: np.ndarray,
    schedule: TauSchedule,
    stop: StoppingRule,
    monitors: FrozenSet[str] | Sequence[str] = frozenset(),
    *,
    settings: Optional[MonitorSettings] = None,
    inner_tol: float = INNER_TOL,
    max_inner_iterations: int = MAX_INNER_ITERATIONS,
    max_outer_iterations: int = MAX_OUTER_ITERATIONS,
) -> List[IterateRecord]:
    """Iterate from p_0 = 0 until the stopping rule fires.

    Every record carries the requested monitor values:
    `dual_objective`, `guler_slack` (worst normalized slack over the sampled
    duals), `ppm_violation` and `kkt_violation`.

    Raises:
        SafetyCapReached: the outer cap was hit, or a Morozov run outgrew
            its growth bound; `records` holds the partial run.
    """
    monitors = frozenset(monitors)
    unknown = monitors - MONITOR_NAMES
    if unknown:
        raise ValueError(f"unknown monitors: {sorted(unknown)}")
    g_obs = np.asarray(g_obs, dtype=float)
    if g_obs.shape != (operator.rows,):
        raise DimensionMismatchError(f"data must have length {operator.rows}, got shape {g_obs.shape}")
    if stop.kind is StoppingKind.MOROZOV and not schedule.is_bounded:
        raise ValueError("morozov stopping requires a bounded step-size schedule")
    if settings is None and monitors & {"guler", "ppm"}:
        settings = MonitorSettings.default(operator, regularizer)

    solver = make_inner_solver(operator, regularizer, inner_tol, max_inner_iterations)
    growth_limit = GROWTH_ABORT_FACTOR * stop.growth_bound(schedule)
    sample_values = None
    if "guler" in monitors:
        sample_values = [mon.dual_objective(p, g_obs, operator, regularizer) for p in settings.sample_duals]

    logger.info(
        "ALM run: %s stopping, %s schedule, %s regularizer",
        stop.kind.value,
        schedule.kind.value,
        type(regularizer).__name__,
    )
    state = AlmState.initial(operator, g_obs)
    records: List[IterateRecord] = []
    while True:
        if state.k >= max_outer_iterations:
            logger.warning("Safety cap of %d outer iterations reached", max_outer_iterations)
            raise SafetyCapReached(f"outer iteration cap {max_outer_iterations} reached", records)
        tau = schedule.tau(state.k + 1)
        previous = state
        state = alm_step(state, tau, g_obs, operator, regularizer, inner_tol, solver=solver)

        values: Dict[str, float] = {}
        if "dual_objective" in monitors:
            values["dual_objective"] = mon.dual_objective(state.p, g_obs, operator, regularizer)
        if "guler" in monitors:
            samples = mon.guler_step(
                state.k,
                state.p,
                previous.p,
                tau,
                state.t,
                g_obs,
                operator,
                regularizer,
                settings.sample_duals,
                sample_values,
            )
            values["guler_slack"] = min((s.normalized for s in samples), default=0.0)
        if "ppm" in monitors:
            values["ppm_violation"] = mon.check_ppm_optimality(
                state.p, previous.p, tau, g_obs, operator, regularizer, settings.probes
            )
        if "kkt" in monitors:
            values["kkt_violation"] = mon.check_kkt_subgradient(state.u, state.p, operator, regularizer)
        records.append(IterateRecord(state=state, tau=tau, monitors=values))
        logger.debug(
            "k=%d t=%.6e residual=%.6e inner=%d", state.k, state.t, state.residual, state.inner_iterations
        )

        if stop.reached(state):
            break
        if state.t > growth_limit:
            logger.warning("t_n = %.6e exceeds %g x the growth bound", state.t, GROWTH_ABORT_FACTOR)
            raise SafetyCapReached(
                f"total time {state.t:.6e} exceeds {GROWTH_ABORT_FACTOR:g} x the Morozov growth bound", records
            )

    logger.info("Stopped at n=%d, t=%.6e, residual=%.6e", state.k, state.t, state.residual)
    return records


def iterated_tikhonov_step(
    u_prev: np.ndarray,
    tau: float,
    g_obs: np.ndarray,
    operator: LinearOperator,
    penalty: Optional[LinearOperator] = None,
) -> np.ndarray:
    """argmin_u tau ||K u - g||^2 + ||L (u - u_prev)||^2, L = Id when no penalty is given.

    Raises:
        np.linalg.LinAlgError: K^T K and L^T L share a null direction.
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    lt_l = Quadratic(penalty).gram_matrix(operator.cols)
    system = tau * operator.gram + lt_l
    rhs = tau * operator.adjoint_apply(g_obs) + lt_l @ np.asarray(u_prev, dtype=float)
    return sla.cho_solve(sla.cho_factor(system), rhs)
