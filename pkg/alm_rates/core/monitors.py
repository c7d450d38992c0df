"""
Run-time invariant monitors for the ALM iteration.

All checks work on plain vectors so they can be evaluated online inside
`alm.run` or afterwards on a list of iterate records:

- dual objective G(p, g) = J*(K* p) - <p, g>
- Güler's inequality for the proximal point sequence (requires p_0 = 0)
- descent probes around the proximal point minimizer p_k
- the KKT relation K* p_k in dJ(u_k)
"""

from __future__ import annotations

import dataclasses
import math
from typing import Iterable, List, Sequence

import numpy as np

from .operators import LinearOperator
from .regularizers import PowerSparsity, Regularizer

GULER_TOL = 1e-8
PPM_TOL = 1e-8
PPM_EPSILONS = (1e-3, 1e-4)
DUAL_MONOTONE_TOL = 1e-10
DUAL_SAMPLE_SCALES = (0.1, 1.0, 10.0)


def dual_objective(p: np.ndarray, g: np.ndarray, operator: LinearOperator, regularizer: Regularizer) -> float:
    """G(p, g) = J*(K* p) - <p, g>; +inf outside the domain of J*."""
    p = np.asarray(p, dtype=float)
    conj = regularizer.conjugate(operator.adjoint_apply(p))
    if math.isinf(conj):
        return math.inf
    return conj - float(p @ np.asarray(g, dtype=float))


@dataclasses.dataclass(frozen=True)
class GulerSample:
    n: int
    slack: float
    rhs: float

    @property
    def normalized(self) -> float:
        if math.isnan(self.slack) or math.isinf(self.rhs):
            return -math.inf
        return self.slack / (1.0 + abs(self.rhs))

    @property
    def passed(self) -> bool:
        return self.normalized >= -GULER_TOL


def guler_step(
    n: int,
    p_n: np.ndarray,
    p_prev: np.ndarray,
    tau_n: float,
    t_n: float,
    g_obs: np.ndarray,
    operator: LinearOperator,
    regularizer: Regularizer,
    sample_duals: Sequence[np.ndarray],
    sample_values: Sequence[float] | None = None,
) -> List[GulerSample]:
    """Slacks of
    t_n ||p_n - p_{n-1}||^2 / (2 tau_n^2)
        <= G(p) - G(p_n) - ||p - p_n||^2 / (2 t_n) + ||p||^2 / (2 t_n)
    for each sampled dual p.
    """
    lhs = t_n * float(np.sum((p_n - p_prev) ** 2)) / (2.0 * tau_n**2)
    g_n = dual_objective(p_n, g_obs, operator, regularizer)
    if sample_values is None:
        sample_values = [dual_objective(p, g_obs, operator, regularizer) for p in sample_duals]
    out = []
    for p, g_p in zip(sample_duals, sample_values):
        rhs = g_p - g_n - float(np.sum((p - p_n) ** 2)) / (2.0 * t_n) + float(p @ p) / (2.0 * t_n)
        out.append(GulerSample(n=n, slack=rhs - lhs, rhs=rhs))
    return out


def check_guler(
    records: Sequence,
    g_obs: np.ndarray,
    operator: LinearOperator,
    regularizer: Regularizer,
    sample_duals: Sequence[np.ndarray],
) -> List[GulerSample]:
    """Evaluate Güler's inequality on every stored iterate.

    `records` must start at k = 1 of a run started from p_0 = 0 and hold the
    dual iterates.
    """
    values = [dual_objective(p, g_obs, operator, regularizer) for p in sample_duals]
    p_prev = np.zeros(operator.rows)
    out: List[GulerSample] = []
    for rec in records:
        out.extend(
            guler_step(
                rec.k, rec.p, p_prev, rec.tau, rec.t, g_obs, operator, regularizer, sample_duals, values
            )
        )
        p_prev = rec.p
    return out


def check_ppm_optimality(
    p_k: np.ndarray,
    p_prev: np.ndarray,
    tau: float,
    g_obs: np.ndarray,
    operator: LinearOperator,
    regularizer: Regularizer,
    probes: Iterable[np.ndarray],
    epsilons: Sequence[float] = PPM_EPSILONS,
) -> float:
    """Largest decrease of F(p) = 1/2 ||p - p_prev||^2 + tau G(p, g) found by
    stepping from p_k along the probe directions; 0 when none decreases F."""

    def objective(p: np.ndarray) -> float:
        g_val = dual_objective(p, g_obs, operator, regularizer)
        if math.isinf(g_val):
            return math.inf
        return 0.5 * float(np.sum((p - p_prev) ** 2)) + tau * g_val

    base = objective(p_k)
    worst = 0.0
    if math.isinf(base):
        return math.inf
    for d in probes:
        for eps in epsilons:
            if eps == 0:
                continue
            worst = max(worst, base - objective(p_k + eps * np.asarray(d)))
    return worst


def check_kkt_subgradient(
    u_k: np.ndarray, p_k: np.ndarray, operator: LinearOperator, regularizer: Regularizer
) -> float:
    return regularizer.kkt_violation(u_k, operator.adjoint_apply(p_k))


def dual_monotonicity_violation(values: Sequence[float]) -> float:
    """Largest relative increase of consecutive dual objective values."""
    worst = 0.0
    for prev, cur in zip(values, values[1:]):
        if math.isinf(prev) and prev > 0:
            continue
        worst = max(worst, (cur - prev) / max(1.0, abs(prev)))
    return worst


def random_sample_duals(
    operator: LinearOperator,
    regularizer: Regularizer,
    count: int,
    seed: int,
    scales: Sequence[float] = DUAL_SAMPLE_SCALES,
) -> List[np.ndarray]:
    """Gaussian duals with norms cycling through `scales`.

    For the l1 functional the samples are shrunk into the domain of
    J*(K* .) so that G stays finite.
    """
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        p = rng.standard_normal(operator.rows)
        p *= scales[i % len(scales)] / np.linalg.norm(p)
        if isinstance(regularizer, PowerSparsity) and regularizer.is_l1:
            sup = float(np.max(np.abs(operator.adjoint_apply(p))))
            if sup > 1.0:
                p /= sup
        out.append(p)
    return out


def random_probes(rows: int, count: int, seed: int) -> List[np.ndarray]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        d = rng.standard_normal(rows)
        out.append(d / np.linalg.norm(d))
    return out
