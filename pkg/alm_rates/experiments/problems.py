"""
Synthetic problems with a known solution satisfying a source condition.

A problem carries K, the exact solution u†, the exact data g = K u†, a
subgradient xi† of J at u† and the source element p† with

    standard:  xi† = K* p†
    holder:    xi† = (K*K)^nu p†        (p† lives in the solution space)

plus the Tikhonov-Morozov arm (K = Id, J = 1/2 ||L u||^2) where
L u† = (Id + L L^T)^-nu omega†.
"""

from __future__ import annotations

import dataclasses
import enum
import logging
import math
from typing import Optional, Union

import numpy as np

from ..core.index_functions import IndexFunction
from ..core.operators import (
    LinearOperator,
    OperatorSpec,
    fractional_gram_apply,
    make_test_operator,
    svd,
)
from ..core.regularizers import PowerSparsity, Quadratic, Regularizer, bregman
from ..errors import SourceConditionError

logger = logging.getLogger(__name__)

SOURCE_TOL = 1e-10
RESTRICTED_SIGMA_MIN = 1e-6
SUPPORT_ATTEMPTS = 50
# off-support certificate entries must stay below 1 - CERTIFICATE_GAP
CERTIFICATE_GAP = 1e-9
VI_SCALES = (1e-3, 1e-2, 1e-1, 1.0, 1e1)
VI_TOL = 1e-8


class SourceKind(str, enum.Enum):
    STANDARD = "standard"
    HOLDER = "holder"


@dataclasses.dataclass(frozen=True)
class SourceSpec:
    kind: SourceKind = SourceKind.STANDARD
    nu: float = 0.5
    support_size: int = 3
    magnitude: float = 1.0
    seed: int = 0
    # 0 draws a Gaussian element; otherwise |coefficient j| ~ j^-profile in the singular basis
    profile: float = 0.0

    def __post_init__(self):
        if self.kind is SourceKind.HOLDER and not 0.0 < self.nu <= 0.5:
            raise SourceConditionError(f"holder exponent nu must lie in (0, 1/2], got {self.nu}")
        if self.support_size < 1:
            raise SourceConditionError("support size must be at least 1")
        if not self.magnitude > 0:
            raise SourceConditionError("source magnitude must be positive")
        if self.profile < 0:
            raise SourceConditionError(f"source profile must be non-negative, got {self.profile}")

    @classmethod
    def standard(cls, **kwargs) -> "SourceSpec":
        return cls(SourceKind.STANDARD, **kwargs)

    @classmethod
    def holder(cls, nu: float, **kwargs) -> "SourceSpec":
        return cls(SourceKind.HOLDER, nu=nu, **kwargs)

    @property
    def effective_nu(self) -> float:
        """Smoothness index; the standard condition counts as nu = 1/2."""
        return 0.5 if self.kind is SourceKind.STANDARD else self.nu


@dataclasses.dataclass(frozen=True, eq=False)
class Problem:
    operator: LinearOperator
    regularizer: Regularizer
    source: SourceSpec
    u_true: np.ndarray
    g: np.ndarray
    xi_true: np.ndarray
    p_true: np.ndarray
    # ||p†||, or ||omega†|| kappa^(2 nu) on the Tikhonov-Morozov arm
    source_strength: float
    support: Optional[np.ndarray] = None
    restricted_sigma_min: Optional[float] = None

    def bregman_to_truth(self, u: np.ndarray) -> float:
        return bregman(self.regularizer, u, self.u_true, self.xi_true)

    def norm_error(self, u: np.ndarray) -> float:
        return float(np.linalg.norm(np.asarray(u) - self.u_true))


def _rng_unit(rng: np.random.Generator, n: int, magnitude: float) -> np.ndarray:
    v = rng.standard_normal(n)
    return magnitude * v / np.linalg.norm(v)


def _profiled_element(rng: np.random.Generator, basis: np.ndarray, magnitude: float, profile: float) -> np.ndarray:
    """sum_j s_j j^-profile basis[:, j] with random signs s_j, scaled to `magnitude`.

    Columns of `basis` run from the smoothest direction down. profile = 1/2
    spreads the source evenly over the spectrum on a log scale.
    """
    j = np.arange(1, basis.shape[1] + 1, dtype=float)
    coefficients = rng.choice([-1.0, 1.0], size=j.shape[0]) * j ** (-profile)
    v = basis @ coefficients
    return magnitude * v / np.linalg.norm(v)


def _source_element(
    rng: np.random.Generator, source: SourceSpec, size: int, basis: Optional[np.ndarray]
) -> np.ndarray:
    if basis is None:
        return _rng_unit(rng, size, source.magnitude)
    return _profiled_element(rng, basis, source.magnitude, source.profile)


def _tikhonov_morozov(
    operator: LinearOperator, regularizer: Quadratic, source: SourceSpec, rng: np.random.Generator
):
    """L u† = (Id + L L^T)^-nu omega†; returns (u†, xi†, omega†, strength)."""
    if not operator.is_identity():
        raise SourceConditionError("holder sources with a penalty operator need K = Id")
    penalty = regularizer.penalty
    if penalty.rows != penalty.cols:
        raise SourceConditionError("holder sources need a square penalty operator")
    n = operator.cols
    l_mat = penalty.matrix
    # ascending eigenvalues of L L^T: smoothest directions first
    w, q = np.linalg.eigh(l_mat @ l_mat.T)
    omega = _source_element(rng, source, n, q if source.profile > 0 else None)
    smoothed = q @ ((1.0 + w) ** (-source.nu) * (q.T @ omega))
    u_true = np.linalg.solve(l_mat, smoothed)
    xi_true = regularizer.gradient(u_true)
    lam = np.linalg.eigvalsh(penalty.gram)
    kappa = float(np.max(np.sqrt(np.maximum(lam, 0.0) / (1.0 + lam))))
    strength = float(np.linalg.norm(omega)) * kappa ** (2.0 * source.nu)
    return u_true, xi_true, omega, strength


def _quadratic_source(operator: LinearOperator, regularizer: Quadratic, source: SourceSpec, p_true):
    rng = np.random.default_rng(source.seed)
    holder = source.kind is SourceKind.HOLDER
    if holder and not regularizer.is_identity:
        return _tikhonov_morozov(operator, regularizer, source, rng)
    size = operator.cols if holder else operator.rows
    factorization = svd(operator) if holder or source.profile > 0 else None
    if p_true is None:
        basis = None
        if source.profile > 0:
            vectors = factorization.right if holder else factorization.left
            basis = vectors[:, factorization.rank_mask]
        p_true = _source_element(rng, source, size, basis)
    p_true = np.asarray(p_true, dtype=float)
    if holder:
        xi_true = fractional_gram_apply(factorization, source.nu, p_true)
    else:
        xi_true = operator.adjoint_apply(p_true)
    if regularizer.is_identity:
        u_true = xi_true.copy()
    else:
        u_true = np.linalg.solve(regularizer.gram_matrix(operator.cols), xi_true)
    return u_true, xi_true, p_true, float(np.linalg.norm(p_true))


def _source_map(operator: LinearOperator, source: SourceSpec) -> np.ndarray:
    """Matrix of p -> xi: K^T, or (K*K)^nu for holder sources."""
    if source.kind is SourceKind.HOLDER:
        f = svd(operator)
        mask = f.rank_mask
        powers = np.where(mask, np.where(mask, f.singular_values, 1.0) ** (2.0 * source.nu), 0.0)
        return (f.right * powers) @ f.right.T
    return operator.matrix.T


def _restricted_sigma_min(operator: LinearOperator, support: np.ndarray) -> float:
    columns = operator.matrix[:, support]
    return float(np.linalg.svd(columns, compute_uv=False)[-1])


def _l1_certificate(operator: LinearOperator, source: SourceSpec, rng: np.random.Generator):
    """Draw support and signs until the minimum-norm certificate is strict."""
    source_map = _source_map(operator, source)
    n = operator.cols
    for attempt in range(1, SUPPORT_ATTEMPTS + 1):
        support = np.sort(rng.choice(n, size=source.support_size, replace=False))
        signs = rng.choice([-1.0, 1.0], size=source.support_size)
        sigma_min = _restricted_sigma_min(operator, support)
        if sigma_min <= RESTRICTED_SIGMA_MIN:
            logger.debug("attempt %d: restricted sigma_min %.3e too small", attempt, sigma_min)
            continue
        rows = source_map[support, :]
        p_true = np.linalg.lstsq(rows, signs, rcond=None)[0]
        xi = source_map @ p_true
        on_support = float(np.max(np.abs(xi[support] - signs)))
        off = np.delete(np.abs(xi), support)
        off_max = float(np.max(off)) if off.size else 0.0
        if on_support <= SOURCE_TOL and off_max < 1.0 - CERTIFICATE_GAP:
            xi[support] = signs
            return support, signs, p_true, xi, sigma_min
        logger.debug("attempt %d: certificate off-support max %.6f", attempt, off_max)
    raise SourceConditionError(f"no strict l1 certificate found in {SUPPORT_ATTEMPTS} support draws")


def _sparsity_source(operator: LinearOperator, regularizer: PowerSparsity, source: SourceSpec):
    if source.support_size > operator.cols / 4:
        raise SourceConditionError(
            f"support size {source.support_size} exceeds cols/4 = {operator.cols / 4:g}"
        )
    rng = np.random.default_rng(source.seed)
    if regularizer.is_l1:
        support, signs, p_true, xi_true, sigma_min = _l1_certificate(operator, source, rng)
        u_true = np.zeros(operator.cols)
        u_true[support] = signs * source.magnitude
        return u_true, xi_true, p_true, support, sigma_min

    support = np.sort(rng.choice(operator.cols, size=source.support_size, replace=False))
    sigma_min = _restricted_sigma_min(operator, support)
    if sigma_min <= RESTRICTED_SIGMA_MIN:
        raise SourceConditionError(f"restricted injectivity fails: sigma_min = {sigma_min:.3e}")
    u_true = np.zeros(operator.cols)
    u_true[support] = rng.choice([-1.0, 1.0], size=support.shape[0]) * source.magnitude
    xi_true = regularizer.gradient(u_true)
    source_map = _source_map(operator, source)
    p_true = np.linalg.lstsq(source_map, xi_true, rcond=None)[0]
    miss = float(np.linalg.norm(source_map @ p_true - xi_true))
    if miss > SOURCE_TOL * max(1.0, float(np.linalg.norm(xi_true))):
        raise SourceConditionError(
            f"subgradient is not in the range of the source map (residual {miss:.3e})"
        )
    return u_true, xi_true, p_true, support, sigma_min


def _verify(problem: Problem) -> None:
    reg, src = problem.regularizer, problem.source
    violation = reg.kkt_violation(problem.u_true, problem.xi_true)
    if violation > SOURCE_TOL:
        raise SourceConditionError(f"xi† is not a subgradient at u† (violation {violation:.3e})")
    tm_arm = isinstance(reg, Quadratic) and not reg.is_identity and src.kind is SourceKind.HOLDER
    if not tm_arm:
        mapped = _source_map(problem.operator, src) @ problem.p_true
        miss = float(np.linalg.norm(mapped - problem.xi_true))
        if miss > SOURCE_TOL * max(1.0, float(np.linalg.norm(problem.xi_true))):
            raise SourceConditionError(f"source representation residual {miss:.3e}")
    if isinstance(reg, PowerSparsity) and reg.is_l1:
        if float(np.max(np.abs(problem.xi_true))) > 1.0 + SOURCE_TOL:
            raise SourceConditionError("l1 certificate leaves the unit ball")


def build_problem(
    operator: Union[LinearOperator, OperatorSpec],
    regularizer: Regularizer,
    source: SourceSpec,
    p_true: Optional[np.ndarray] = None,
) -> Problem:
    """Construct (K, u†, g, xi†, p†) and verify the source condition.

    `p_true` fixes the source element for quadratic functionals with the
    identity penalty; otherwise it is drawn from the source seed.

    Raises:
        SourceConditionError: restricted injectivity fails, no certificate
            exists, or the source element is not representable.
    """
    if isinstance(operator, OperatorSpec):
        operator = make_test_operator(operator)
    support = sigma_min = None
    if isinstance(regularizer, Quadratic):
        u_true, xi_true, p_src, strength = _quadratic_source(operator, regularizer, source, p_true)
    elif isinstance(regularizer, PowerSparsity):
        u_true, xi_true, p_src, support, sigma_min = _sparsity_source(operator, regularizer, source)
        strength = float(np.linalg.norm(p_src))
    else:
        raise TypeError(f"unsupported regularizer {type(regularizer).__name__}")
    problem = Problem(
        operator=operator,
        regularizer=regularizer,
        source=source,
        u_true=u_true,
        g=operator.apply(u_true),
        xi_true=xi_true,
        p_true=p_src,
        source_strength=strength,
        support=support,
        restricted_sigma_min=sigma_min,
    )
    _verify(problem)
    logger.info(
        "Built %s problem: %dx%d %s operator, %s source, strength %.4e",
        type(regularizer).__name__,
        operator.rows,
        operator.cols,
        operator.kind.value,
        source.kind.value,
        strength,
    )
    return problem


def add_noise(g: np.ndarray, delta: float, seed: int) -> np.ndarray:
    """g + delta * d with d a seeded Gaussian unit direction, so ||g - g^delta|| = delta."""
    if delta < 0:
        raise ValueError(f"noise level must be non-negative, got {delta}")
    g = np.asarray(g, dtype=float)
    if delta == 0:
        return g.copy()
    direction = np.random.default_rng(seed).standard_normal(g.shape[0])
    return g + delta * direction / np.linalg.norm(direction)


# -----------------------------
# Variational inequalities
# -----------------------------


class DistanceKind(str, enum.Enum):
    BREGMAN = "bregman"
    NORM_POWER = "norm_power"


@dataclasses.dataclass(frozen=True)
class VariationalInequalitySpec:
    """D(u, u†) <= J(u) - J(u†) + Phi(||K u - g||^2) with
    D = beta * Bregman or D = C ||u - u†||^power."""

    index_function: IndexFunction
    distance: DistanceKind = DistanceKind.BREGMAN
    beta: float = 1.0
    coefficient: float = 1.0
    power: float = 2.0
    certified: bool = True

    def __post_init__(self):
        if self.distance is DistanceKind.BREGMAN and not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if not self.coefficient > 0:
            raise ValueError("norm coefficient must be positive")

    def distance_to_truth(self, problem: Problem, u: np.ndarray) -> float:
        if self.distance is DistanceKind.BREGMAN:
            return self.beta * problem.bregman_to_truth(u)
        return self.coefficient * problem.norm_error(u) ** self.power


def holder_constants(strength: float, nu: float) -> tuple[float, IndexFunction]:
    """(beta, Phi) from strength * a^(2 nu) b^(1 - 2 nu) <= (1 - beta)/2 b^2 + Phi(a^2).

    Young's inequality with weight eta, chosen so that 1 - beta = 1/2.
    nu = 1/2 needs no weight: beta = 1 and Phi = strength sqrt(s).
    """
    if nu == 0.5:
        return 1.0, IndexFunction(c=strength, p=0.5)
    eta_sq = 1.0 / (2.0 * (1.0 - 2.0 * nu))
    c = 0.5 * (1.0 + 2.0 * nu) * strength ** (2.0 / (1.0 + 2.0 * nu)) * eta_sq ** (
        -(1.0 - 2.0 * nu) / (1.0 + 2.0 * nu)
    )
    return 0.5, IndexFunction.holder(c=c, nu=nu)


def variational_spec(problem: Problem) -> VariationalInequalitySpec:
    """The (D, Phi) pair implied by the constructed source condition."""
    src, reg = problem.source, problem.regularizer
    strength = problem.source_strength
    if src.kind is SourceKind.STANDARD:
        return VariationalInequalitySpec(IndexFunction(c=strength, p=0.5))
    if isinstance(reg, Quadratic):
        beta, phi = holder_constants(strength, src.nu)
        return VariationalInequalitySpec(phi, beta=beta)
    q = reg.q
    phi = IndexFunction(c=strength, p=q * src.nu / (q - 1.0 + 2.0 * src.nu))
    # constants of the sparsity estimate are not computable
    return VariationalInequalitySpec(phi, DistanceKind.NORM_POWER, power=q, certified=False)


def variational_slack(problem: Problem, vispec: VariationalInequalitySpec, u: np.ndarray) -> float:
    reg = problem.regularizer
    residual = float(np.sum((problem.operator.apply(u) - problem.g) ** 2))
    return (
        reg.value(u)
        - reg.value(problem.u_true)
        + vispec.index_function.phi(residual)
        - vispec.distance_to_truth(problem, u)
    )


@dataclasses.dataclass(frozen=True)
class VariationalReport:
    worst_slack: float
    worst_scale: float
    samples: int
    passed: bool


def verify_variational_inequality(
    problem: Problem, vispec: VariationalInequalitySpec, samples: int = 1000, seed: int = 0
) -> VariationalReport:
    """Sample u = u† + scale * d over scales 1e-3..1e1, alternating random
    unit directions and signed coordinate directions."""
    rng = np.random.default_rng(seed)
    n = problem.operator.cols
    worst, worst_scale, passed = math.inf, math.nan, True
    for i in range(samples):
        scale = VI_SCALES[i % len(VI_SCALES)]
        if (i // len(VI_SCALES)) % 2 == 0:
            d = _rng_unit(rng, n, 1.0)
        else:
            d = np.zeros(n)
            d[rng.integers(n)] = rng.choice([-1.0, 1.0])
        slack = variational_slack(problem, vispec, problem.u_true + scale * d)
        if slack < worst:
            worst, worst_scale = slack, scale
        if slack < -VI_TOL * scale:
            passed = False
    if not passed:
        logger.warning("Variational inequality violated: worst slack %.3e at scale %g", worst, worst_scale)
    return VariationalReport(worst_slack=worst, worst_scale=worst_scale, samples=samples, passed=passed)
