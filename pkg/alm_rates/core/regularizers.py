"""
Convex regularization functionals J.

Two families:
- Quadratic(L):       J(u) = 1/2 ||L u||^2   (L = identity when no penalty is given)
- PowerSparsity(q):   J(u) = sum_i |u_i|^q,  1 <= q < 2, coordinate basis

Each functional evaluates J, its Legendre-Fenchel conjugate J* (extended
real, +inf reported as math.inf), a canonical subgradient, the proximal map
and a KKT violation measure used by the iteration monitors.
"""

from __future__ import annotations

import abc
import dataclasses
import math
from functools import cached_property
from typing import Optional, Union

import numpy as np
from scipy import linalg as sla

from ..errors import InnerSolverError, OperatorSpecError
from .operators import LinearOperator

# max|xi_i| <= 1 + BALL_SLACK counts as inside the unit ball for the l1 conjugate
BALL_SLACK = 1e-8
# range test for the quadratic conjugate with singular L^T L
RANGE_TOL = 1e-8
# prox root-finder
PROX_MAX_ITERATIONS = 200
PROX_ABS_TOL = 1e-12


@dataclasses.dataclass(frozen=True, eq=False)
class Subgradient:
    xi: np.ndarray
    at: np.ndarray


class Regularizer(abc.ABC):
    """Interface shared by all regularization functionals."""

    @abc.abstractmethod
    def value(self, u: np.ndarray) -> float:
        """J(u)."""

    @abc.abstractmethod
    def conjugate(self, xi: np.ndarray) -> float:
        """J*(xi) = sup_u <xi, u> - J(u); may be math.inf."""

    @abc.abstractmethod
    def subgradient(self, u: np.ndarray) -> Subgradient:
        """A canonical element of the subdifferential at u."""

    @abc.abstractmethod
    def prox(self, lam: float, y: np.ndarray) -> np.ndarray:
        """argmin_x 1/2 ||x - y||^2 + lam J(x)."""

    @abc.abstractmethod
    def kkt_violation(self, u: np.ndarray, xi: np.ndarray) -> float:
        """How far xi is from being a subgradient of J at u."""

    def __call__(self, u: np.ndarray) -> float:
        return self.value(u)


def _check_lambda(lam: float) -> None:
    if not lam > 0:
        raise ValueError(f"prox parameter must be positive, got {lam}")


@dataclasses.dataclass(frozen=True, eq=False)
class Quadratic(Regularizer):
    penalty: Optional[LinearOperator] = None

    @property
    def is_identity(self) -> bool:
        return self.penalty is None

    def gram_matrix(self, n: int) -> np.ndarray:
        """L^T L as a dense n x n matrix."""
        if self.penalty is None:
            return np.eye(n)
        if self.penalty.cols != n:
            raise OperatorSpecError(f"penalty acts on length {self.penalty.cols}, not {n}")
        return self.penalty.gram

    @cached_property
    def _gram_eigen(self) -> tuple[np.ndarray, np.ndarray]:
        w, q = np.linalg.eigh(self.penalty.gram)
        return w, q

    def value(self, u: np.ndarray) -> float:
        u = np.asarray(u, dtype=float)
        lu = u if self.penalty is None else self.penalty.apply(u)
        return 0.5 * float(lu @ lu)

    def gradient(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.penalty is None:
            return u.copy()
        return self.penalty.adjoint_apply(self.penalty.apply(u))

    def conjugate(self, xi: np.ndarray) -> float:
        xi = np.asarray(xi, dtype=float)
        if self.penalty is None:
            return 0.5 * float(xi @ xi)
        w, q = self._gram_eigen
        coeffs = q.T @ xi
        tol = w.shape[0] * np.finfo(float).eps * max(float(w[-1]), 0.0)
        regular = w > tol
        outside = float(np.linalg.norm(coeffs[~regular]))
        if outside > RANGE_TOL * float(np.linalg.norm(xi)):
            return math.inf
        return 0.5 * float(np.sum(coeffs[regular] ** 2 / w[regular]))

    def subgradient(self, u: np.ndarray) -> Subgradient:
        u = np.asarray(u, dtype=float)
        return Subgradient(xi=self.gradient(u), at=u)

    def prox(self, lam: float, y: np.ndarray) -> np.ndarray:
        _check_lambda(lam)
        y = np.asarray(y, dtype=float)
        if self.penalty is None:
            return y / (1.0 + lam)
        system = np.eye(y.shape[0]) + lam * self.gram_matrix(y.shape[0])
        return sla.cho_solve(sla.cho_factor(system), y)

    def kkt_violation(self, u: np.ndarray, xi: np.ndarray) -> float:
        u = np.asarray(u, dtype=float)
        return float(np.linalg.norm(np.asarray(xi) - self.gradient(u)) / (1.0 + np.linalg.norm(u)))


@dataclasses.dataclass(frozen=True)
class PowerSparsity(Regularizer):
    q: float = 1.0

    def __post_init__(self):
        if not 1.0 <= self.q < 2.0:
            raise OperatorSpecError(f"sparsity exponent q must lie in [1, 2), got {self.q}")

    @property
    def is_l1(self) -> bool:
        return self.q == 1.0

    def value(self, u: np.ndarray) -> float:
        return float(np.sum(np.abs(np.asarray(u, dtype=float)) ** self.q))

    def gradient(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.is_l1:
            return np.sign(u)
        return self.q * np.abs(u) ** (self.q - 1.0) * np.sign(u)

    def conjugate(self, xi: np.ndarray) -> float:
        xi = np.asarray(xi, dtype=float)
        if xi.size == 0:
            return 0.0
        if self.is_l1:
            return 0.0 if float(np.max(np.abs(xi))) <= 1.0 + BALL_SLACK else math.inf
        dual_exponent = self.q / (self.q - 1.0)
        return float(np.sum((self.q - 1.0) * (np.abs(xi) / self.q) ** dual_exponent))

    def subgradient(self, u: np.ndarray) -> Subgradient:
        u = np.asarray(u, dtype=float)
        return Subgradient(xi=self.gradient(u), at=u)

    def prox(self, lam: float, y: np.ndarray) -> np.ndarray:
        _check_lambda(lam)
        y = np.asarray(y, dtype=float)
        if self.is_l1:
            # |y| == lam maps to exactly 0
            return np.sign(y) * np.maximum(np.abs(y) - lam, 0.0)
        return power_prox(self.q, lam, y)

    def kkt_violation(self, u: np.ndarray, xi: np.ndarray) -> float:
        u = np.asarray(u, dtype=float)
        xi = np.asarray(xi, dtype=float)
        if not self.is_l1:
            return float(np.linalg.norm(xi - self.gradient(u)) / (1.0 + np.linalg.norm(u)))
        if xi.size == 0:
            return 0.0
        ball = max(0.0, float(np.max(np.abs(xi))) - 1.0)
        support = u != 0
        if not np.any(support):
            return ball
        return ball + float(np.max(np.abs(xi[support] - np.sign(u[support]))))


def power_prox(q: float, lam: float, y: np.ndarray) -> np.ndarray:
    """Coordinatewise argmin_x 1/2 (x - y)^2 + lam |x|^q for 1 < q < 2.

    Solves x + lam q x^(q-1) = |y| on [0, |y|] with Newton steps kept inside
    a shrinking bracket; a step leaving the bracket is replaced by bisection.
    """
    if not 1.0 < q < 2.0:
        raise OperatorSpecError(f"power prox needs 1 < q < 2, got {q}")
    _check_lambda(lam)
    y = np.asarray(y, dtype=float)
    target = np.abs(y)
    lo = np.zeros_like(target)
    hi = target.copy()
    x = target.copy()
    tol = np.maximum(PROX_ABS_TOL, 4.0 * np.finfo(float).eps * target)
    with np.errstate(divide="ignore", invalid="ignore"):
        for _ in range(PROX_MAX_ITERATIONS):
            h = x + lam * q * x ** (q - 1.0) - target
            dh = 1.0 + lam * q * (q - 1.0) * x ** (q - 2.0)
            hi = np.where(h > 0, x, hi)
            lo = np.where(h <= 0, x, lo)
            newton = x - h / dh
            inside = np.isfinite(newton) & (newton >= lo) & (newton <= hi)
            x_next = np.where(inside, newton, 0.5 * (lo + hi))
            step = np.abs(x_next - x)
            x = x_next
            if np.all(step <= tol):
                return np.sign(y) * x
    raise InnerSolverError(
        "power prox root-finder did not converge",
        achieved=float(np.max(step)),
        iterations=PROX_MAX_ITERATIONS,
    )


def scalar_power_prox(q: float, lam: float, y: float) -> float:
    return float(power_prox(q, lam, np.array([float(y)]))[0])


def bregman(
    reg: Regularizer,
    v: np.ndarray,
    u: np.ndarray,
    xi: Union[Subgradient, np.ndarray],
) -> float:
    """D_J^xi(v, u) = J(v) - J(u) - <xi, v - u>, xi a subgradient at u."""
    xi_vec = xi.xi if isinstance(xi, Subgradient) else np.asarray(xi, dtype=float)
    v = np.asarray(v, dtype=float)
    u = np.asarray(u, dtype=float)
    jv, ju = reg.value(v), reg.value(u)
    distance = jv - ju - float(xi_vec @ (v - u))
    if distance < -1e-10 * max(1.0, abs(jv), abs(ju)):
        raise ValueError(f"negative Bregman distance {distance:.3e}: xi is not a subgradient at u")
    return max(distance, 0.0)
