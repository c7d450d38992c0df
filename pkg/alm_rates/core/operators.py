"""
Finite-dimensional linear operators.

Three kinds are supported:
- dense: an explicit matrix,
- diagonal: a square operator given by its singular values,
- convolution: a centred, odd-length kernel applied with zero padding.

Operators are immutable after construction. The SVD and the Gram powers
(K*K)^nu built from it are what the experiments use to manufacture Hölder
source elements.
"""

from __future__ import annotations

import dataclasses
import enum
import logging
import math
from functools import cached_property
from typing import Optional

import numpy as np

from ..config import SVD_SIZE_LIMIT
from ..errors import DimensionMismatchError, OperatorSpecError

logger = logging.getLogger(__name__)


class OperatorKind(str, enum.Enum):
    DENSE = "dense"
    DIAGONAL = "diagonal"
    CONVOLUTION = "convolution"


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=float, copy=True)
    out.setflags(write=False)
    return out


def _check_length(vector: np.ndarray, expected: int, what: str) -> np.ndarray:
    v = np.asarray(vector, dtype=float)
    if v.ndim != 1 or v.shape[0] != expected:
        raise DimensionMismatchError(f"{what}: expected a vector of length {expected}, got shape {v.shape}")
    return v


@dataclasses.dataclass(frozen=True, eq=False)
class LinearOperator:
    """A linear map K: R^cols -> R^rows with its adjoint.

    `data` holds the matrix (dense), the singular values (diagonal) or the
    kernel (convolution).
    """

    kind: OperatorKind
    rows: int
    cols: int
    data: np.ndarray

    @classmethod
    def dense(cls, matrix: np.ndarray) -> "LinearOperator":
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2 or min(m.shape) < 1:
            raise OperatorSpecError(f"dense operator needs a non-empty 2-d matrix, got shape {m.shape}")
        return cls(OperatorKind.DENSE, m.shape[0], m.shape[1], _frozen(m))

    @classmethod
    def diagonal(cls, singular_values: np.ndarray) -> "LinearOperator":
        s = np.asarray(singular_values, dtype=float)
        if s.ndim != 1 or s.shape[0] < 1:
            raise OperatorSpecError("diagonal operator needs a non-empty vector of singular values")
        return cls(OperatorKind.DIAGONAL, s.shape[0], s.shape[0], _frozen(s))

    @classmethod
    def convolution(cls, kernel: np.ndarray, size: int) -> "LinearOperator":
        k = np.asarray(kernel, dtype=float)
        if k.ndim != 1 or k.shape[0] % 2 != 1:
            raise OperatorSpecError("convolution kernel must be a vector of odd length")
        if size < 1:
            raise OperatorSpecError("convolution size must be positive")
        return cls(OperatorKind.CONVOLUTION, size, size, _frozen(k))

    # -----------------------------
    # Action
    # -----------------------------

    def apply(self, u: np.ndarray) -> np.ndarray:
        u = _check_length(u, self.cols, "apply")
        if self.kind is OperatorKind.DIAGONAL:
            return self.data * u
        if self.kind is OperatorKind.CONVOLUTION and self.cols >= self.data.shape[0]:
            return np.convolve(u, self.data, mode="same")
        return self.matrix @ u

    def adjoint_apply(self, g: np.ndarray) -> np.ndarray:
        g = _check_length(g, self.rows, "adjoint_apply")
        if self.kind is OperatorKind.DIAGONAL:
            return self.data * g
        if self.kind is OperatorKind.CONVOLUTION and self.rows >= self.data.shape[0]:
            # flipped odd kernel: correlation is the transpose of 'same' convolution
            return np.convolve(g, self.data[::-1], mode="same")
        return self.matrix.T @ g

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return self.apply(u)

    # -----------------------------
    # Dense views
    # -----------------------------

    @cached_property
    def matrix(self) -> np.ndarray:
        if self.kind is OperatorKind.DENSE:
            return self.data
        if self.kind is OperatorKind.DIAGONAL:
            return _frozen(np.diag(self.data))
        m = self.data.shape[0]
        centre = (m - 1) // 2
        idx = np.arange(self.rows)
        offsets = idx[:, None] - idx[None, :] + centre
        inside = (offsets >= 0) & (offsets < m)
        return _frozen(np.where(inside, self.data[np.clip(offsets, 0, m - 1)], 0.0))

    def to_dense(self) -> np.ndarray:
        return self.matrix

    @cached_property
    def gram(self) -> np.ndarray:
        """K^T K as a dense matrix."""
        if self.kind is OperatorKind.DIAGONAL:
            return _frozen(np.diag(self.data**2))
        return _frozen(self.matrix.T @ self.matrix)

    @cached_property
    def spectral_norm(self) -> float:
        if self.kind is OperatorKind.DIAGONAL:
            return float(np.max(np.abs(self.data)))
        return float(svd(self).singular_values[0])

    def is_identity(self) -> bool:
        if self.rows != self.cols:
            return False
        if self.kind is OperatorKind.DIAGONAL:
            return bool(np.all(self.data == 1.0))
        return bool(np.array_equal(self.matrix, np.eye(self.rows)))


@dataclasses.dataclass(frozen=True, eq=False)
class SvdFactorization:
    """K = U diag(sigma) V^T with sigma non-increasing (economy size)."""

    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.singular_values) @ self.right.T

    @cached_property
    def rank_mask(self) -> np.ndarray:
        s = self.singular_values
        if s.size == 0 or s[0] == 0.0:
            return np.zeros_like(s, dtype=bool)
        tol = max(self.left.shape[0], self.right.shape[0]) * np.finfo(float).eps * s[0]
        return s > tol


def svd(op: LinearOperator) -> SvdFactorization:
    if min(op.rows, op.cols) > SVD_SIZE_LIMIT:
        raise OperatorSpecError(
            f"dense SVD limited to min(rows, cols) <= {SVD_SIZE_LIMIT}, got {min(op.rows, op.cols)}"
        )
    if op.kind is OperatorKind.DIAGONAL:
        sigma = op.data
        order = np.argsort(-np.abs(sigma), kind="stable")
        eye = np.eye(op.rows)
        right = eye[:, order]
        left = right * np.where(sigma[order] < 0, -1.0, 1.0)
        return SvdFactorization(_frozen(left), _frozen(np.abs(sigma[order])), _frozen(right))
    u, s, vt = np.linalg.svd(op.matrix, full_matrices=False)
    return SvdFactorization(_frozen(u), _frozen(s), _frozen(vt.T))


def fractional_gram_apply(factorization: SvdFactorization, nu: float, p: np.ndarray) -> np.ndarray:
    """Apply (K*K)^nu = V diag(sigma^(2 nu)) V^T.

    Directions with vanishing singular value are dropped for every nu, so
    nu = 0 is the projection onto the range of K*.
    """
    if not 0.0 <= nu <= 0.5:
        raise OperatorSpecError(f"nu must lie in [0, 1/2], got {nu}")
    v = factorization.right
    p = _check_length(p, v.shape[0], "fractional_gram_apply")
    mask = factorization.rank_mask
    sigma = np.where(mask, factorization.singular_values, 1.0)
    powers = np.where(mask, sigma ** (2.0 * nu), 0.0)
    return v @ (powers * (v.T @ p))


# -----------------------------
# Test problems
# -----------------------------


@dataclasses.dataclass(frozen=True)
class OperatorSpec:
    kind: str
    size: int
    cols: Optional[int] = None
    decay: float = 1.0
    width: float = 0.0
    seed: int = 0


def gaussian_kernel(width: float) -> np.ndarray:
    if width < 0:
        raise OperatorSpecError(f"kernel width must be non-negative, got {width}")
    if width == 0:
        return np.ones(1)
    half = int(math.ceil(3.0 * width))
    offsets = np.arange(-half, half + 1, dtype=float)
    kernel = np.exp(-(offsets**2) / (2.0 * width**2))
    return kernel / kernel.sum()


def make_test_operator(spec: OperatorSpec) -> LinearOperator:
    """Canonical ill-posed operators.

    diagonal: sigma_i = i^(-decay), i = 1..size
    convolution: normalised Gaussian kernel of the given width, zero padding
    dense: Gaussian entries scaled by 1/sqrt(rows), seeded
    """
    if spec.size < 1 or (spec.cols is not None and spec.cols < 1):
        raise OperatorSpecError(f"operator sizes must be >= 1, got size={spec.size} cols={spec.cols}")
    kind = spec.kind.lower()
    if kind == OperatorKind.DIAGONAL.value:
        if spec.decay < 0:
            raise OperatorSpecError(f"decay must be non-negative, got {spec.decay}")
        op = LinearOperator.diagonal(np.arange(1, spec.size + 1, dtype=float) ** (-spec.decay))
    elif kind == OperatorKind.CONVOLUTION.value:
        op = LinearOperator.convolution(gaussian_kernel(spec.width), spec.size)
    elif kind == OperatorKind.DENSE.value:
        cols = spec.cols if spec.cols is not None else spec.size
        rng = np.random.default_rng(spec.seed)
        op = LinearOperator.dense(rng.standard_normal((spec.size, cols)) / math.sqrt(spec.size))
    else:
        raise OperatorSpecError(f"unknown operator kind {spec.kind!r}")
    logger.debug("Built %s operator %dx%d", op.kind.value, op.rows, op.cols)
    return op


def identity(n: int) -> LinearOperator:
    return LinearOperator.diagonal(np.ones(n))


def first_difference(n: int, step: float = 1.0) -> LinearOperator:
    """Forward difference with zero boundary: (Lu)_i = (u_{i+1} - u_i) / step, u_n := 0.

    Square and invertible, so L^T L is positive definite. step = 1/n gives a
    discrete derivative on [0, 1], whose singular values grow like n.
    """
    if n < 1:
        raise OperatorSpecError("first_difference needs n >= 1")
    if not step > 0:
        raise OperatorSpecError(f"first_difference step must be positive, got {step}")
    return LinearOperator.dense((-np.eye(n) + np.eye(n, k=1)) / step)
