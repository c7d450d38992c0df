"""
Power-law index functions Phi(s) = c s^p and the conjugate Psi = (Phi^-1)*.

For 0 < p < 1 the conjugate has the closed form

    Psi(s) = (1 - p) p^(p/(1-p)) c^(1/(1-p)) s^(1/(1-p)),

which is checked against the brute-force grid supremum `psi_oracle`.
Exponents above 1/2 are rejected by the constructor; `IndexFunction.unchecked`
builds them for monotonicity tests only.
"""

from __future__ import annotations

import dataclasses
from typing import Optional, Union

import numpy as np

ArrayLike = Union[float, np.ndarray]

MONOTONE_SLACK = 1e-12
ORACLE_REFINEMENTS = 3
ORACLE_POINTS = 20001


def _non_negative(x: ArrayLike, what: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError(f"{what} must be non-negative")
    return arr


def _out(arr: np.ndarray, like: ArrayLike) -> ArrayLike:
    return float(arr) if np.ndim(like) == 0 else arr


@dataclasses.dataclass(frozen=True)
class IndexFunction:
    c: float
    p: float
    restricted: bool = dataclasses.field(default=True, repr=False)

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"index function coefficient must be positive, got {self.c}")
        upper = 0.5 if self.restricted else 1.0
        if not (0.0 < self.p <= upper) or (not self.restricted and self.p >= 1.0):
            raise ValueError(f"index function exponent must lie in (0, {upper}], got {self.p}")

    @classmethod
    def unchecked(cls, c: float, p: float) -> "IndexFunction":
        """Exponents in (0, 1); only for exercising the monotonicity checks."""
        return cls(c=c, p=p, restricted=False)

    @classmethod
    def holder(cls, c: float, nu: float) -> "IndexFunction":
        return cls(c=c, p=2.0 * nu / (1.0 + 2.0 * nu))

    @property
    def psi_exponent(self) -> float:
        return 1.0 / (1.0 - self.p)

    @property
    def psi_coefficient(self) -> float:
        p = self.p
        return (1.0 - p) * p ** (p / (1.0 - p)) * self.c ** (1.0 / (1.0 - p))

    def phi(self, s: ArrayLike) -> ArrayLike:
        arr = _non_negative(s, "phi argument")
        return _out(self.c * arr**self.p, s)

    def phi_inv(self, t: ArrayLike) -> ArrayLike:
        arr = _non_negative(t, "phi_inv argument")
        return _out((arr / self.c) ** (1.0 / self.p), t)

    def psi(self, s: ArrayLike) -> ArrayLike:
        arr = _non_negative(s, "psi argument")
        return _out(self.psi_coefficient * arr**self.psi_exponent, s)

    def psi_inv(self, t: ArrayLike) -> ArrayLike:
        arr = _non_negative(t, "psi_inv argument")
        return _out((arr / self.psi_coefficient) ** (1.0 - self.p), t)

    def psi_maximizer(self, s: float) -> float:
        """The t attaining sup_t s t - Phi^-1(t)."""
        p = self.p
        return (p * s) ** (p / (1.0 - p)) * self.c ** (1.0 / (1.0 - p))


def psi_oracle(f: IndexFunction, s: float, grid: Optional[np.ndarray] = None) -> float:
    """Brute-force max over t of s t - Phi^-1(t).

    The default grid runs to ten times the analytic maximizer. The coarse
    maximum is refined on successively finer local grids around the best
    point. A maximum on the last grid point means the grid is too small.
    """
    if s < 0:
        raise ValueError("psi_oracle argument must be non-negative")
    if s == 0:
        return 0.0
    if grid is None:
        grid = np.linspace(0.0, 10.0 * f.psi_maximizer(s), ORACLE_POINTS)
    t = np.asarray(grid, dtype=float)
    values = s * t - f.phi_inv(t)
    best = int(np.argmax(values))
    if best == t.shape[0] - 1:
        raise ValueError(f"psi_oracle grid too small: maximum at the upper bound {t[-1]:.3e}")
    for _ in range(ORACLE_REFINEMENTS):
        lo = t[max(best - 1, 0)]
        hi = t[min(best + 1, t.shape[0] - 1)]
        t = np.linspace(lo, hi, 2001)
        values = s * t - f.phi_inv(t)
        best = int(np.argmax(values))
    return float(values[best])


def apriori_total_time(f: IndexFunction, delta: float) -> float:
    """Target total time t* = 1 / Psi^-1(delta^2)."""
    if not delta > 0:
        raise ValueError(f"a-priori stopping needs delta > 0, got {delta}")
    return 1.0 / f.psi_inv(delta**2)


def _validated_grid(grid: np.ndarray) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.shape[0] < 100 or np.any(g <= 0) or np.any(np.diff(g) <= 0):
        raise ValueError("monotonicity checks need >= 100 increasing positive grid points")
    return g


def check_phi_ratio_monotone(f: IndexFunction, grid: np.ndarray) -> bool:
    """Is s -> Phi(s)^2 / s non-increasing on the grid."""
    s = _validated_grid(grid)
    ratio = f.phi(s) ** 2 / s
    slack = MONOTONE_SLACK * max(1.0, float(np.max(np.abs(ratio))))
    return bool(np.all(np.diff(ratio) <= slack))


def check_psi_growth_monotone(f: IndexFunction, grid: np.ndarray) -> bool:
    """Is t -> t^2 Psi(2/t) non-decreasing on the grid."""
    t = _validated_grid(grid)
    growth = t**2 * f.psi(2.0 / t)
    slack = MONOTONE_SLACK * max(1.0, float(np.max(np.abs(growth))))
    return bool(np.all(np.diff(growth) >= -slack))


def young_gap(f: IndexFunction, s: ArrayLike, r: ArrayLike) -> ArrayLike:
    """Psi(s) + r - s Phi(r); non-negative by the Fenchel-Young inequality."""
    return f.psi(s) + np.asarray(r, dtype=float) - np.asarray(s, dtype=float) * f.phi(r)
