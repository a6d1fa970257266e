import math

import numpy as np
import pytest

from mpclt.errors import BudgetExceededError
from mpclt.quadrature import NODES, W_G, W_K, integrate_adaptive


def test_rule_weights():
    assert W_K.sum() == pytest.approx(2.0, abs=1e-15)
    assert W_G.sum() == pytest.approx(2.0, abs=1e-15)
    # Kronrod rule exact for degree 22 polynomials
    assert W_K @ NODES ** 22 == pytest.approx(2 / 23, rel=1e-13)


def test_vector_integrand():
    res = integrate_adaptive(
        lambda x: np.vstack([np.sin(x), np.exp(-x) * np.cos(40 * x), np.sqrt(x)]), [0.0, 1.0, 3.0], 1e-12
    )
    exact = [1 - math.cos(3), (math.exp(-3) * (40 * math.sin(120) - math.cos(120)) + 1) / 1601,
             2 / 3 * 3 ** 1.5]
    assert np.allclose(res.value, exact, rtol=0, atol=1e-11)
    assert np.all(res.error <= 1e-12)


def test_relative_tolerance_on_large_values():
    res = integrate_adaptive(lambda x: np.exp(x)[None, :], [0.0, 40.0], 1e-300, rtol=1e-12)
    assert res.value[0] == pytest.approx(math.expm1(40), rel=1e-11)


def test_budget():
    with pytest.raises(BudgetExceededError):
        integrate_adaptive(lambda x: np.sin(1 / x)[None, :], [1e-6, 1.0], 1e-14, node_budget=3000)
