import math

import numpy as np
import pytest

from alm_rates.core.operators import LinearOperator, OperatorSpec, make_test_operator
from alm_rates.core.regularizers import PowerSparsity, Quadratic
from alm_rates.experiments.problems import SourceSpec, build_problem


class CorruptedAdjoint(LinearOperator):
    """Adjoint off by a rank-one term; only used to exercise the adjoint check."""

    def adjoint_apply(self, g):
        out = super().adjoint_apply(g)
        out[0] += 0.1 * float(np.sum(g))
        return out


@pytest.fixture
def scalar_identity():
    return LinearOperator.diagonal(np.ones(1))


@pytest.fixture
def diagonal3():
    return LinearOperator.diagonal(np.array([1.0, 0.5, 1.0 / 3.0]))


@pytest.fixture
def random_square():
    rng = np.random.default_rng(0)
    return LinearOperator.dense(rng.standard_normal((8, 8)) / math.sqrt(8))


@pytest.fixture
def corrupted_operator():
    rng = np.random.default_rng(1)
    base = LinearOperator.dense(rng.standard_normal((6, 6)))
    return CorruptedAdjoint(base.kind, base.rows, base.cols, base.data)


@pytest.fixture
def quadratic_problem():
    """Diagonal sigma_i = 1/i, n = 20, standard source."""
    op = make_test_operator(OperatorSpec(kind="diagonal", size=20, decay=1.0))
    return build_problem(op, Quadratic(), SourceSpec.standard(seed=3))


@pytest.fixture
def sparse_problem():
    """q = 1 on a 20 x 40 Gaussian operator with support 3."""
    spec = OperatorSpec(kind="dense", size=20, cols=40, seed=4)
    return build_problem(spec, PowerSparsity(q=1.0), SourceSpec.standard(support_size=3, seed=5))
