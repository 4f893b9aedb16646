import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rscnet import activation as A


@pytest.mark.parametrize("name", A.NAMES)
def test_declared_constants_bound_the_derivatives(name):
    act = A.get(name)
    x = np.linspace(-20, 20, 10**6)
    assert np.max(np.abs(act.d1(x))) <= act.lipschitz + 1e-12
    assert np.max(np.abs(act.d2(x))) <= act.smoothness + 1e-12
    assert act.fn(np.array(0.0)) == act.value_at_zero


def test_closed_form_constants():
    assert A.get("tanh").smoothness == pytest.approx(0.769800358919501, abs=1e-12)
    assert A.get("sigmoid").smoothness == pytest.approx(0.0962250448649376, abs=1e-12)
    # the declared sup is attained on the grid to high accuracy
    x = np.linspace(-5, 5, 2_000_001)
    assert np.max(np.abs(A.get("tanh").d2(x))) == pytest.approx(4 / (3 * math.sqrt(3)), rel=1e-9)


def test_point_values():
    t = A.get("tanh")
    assert (A.eval(t, 0.0), A.deriv(t, 0.0), A.deriv2(t, 0.0)) == (0.0, 1.0, 0.0)
    assert A.eval(A.get("softplus"), 0.0) == pytest.approx(0.693147180559945, abs=1e-15)
    assert np.all(A.deriv2(A.get("identity"), np.linspace(-3, 3, 7)) == 0)


def test_gelu_exact_form():
    g = A.get("gelu")
    from scipy.stats import norm

    x = np.linspace(-4, 4, 17)
    np.testing.assert_allclose(g.fn(x), x * norm.cdf(x), atol=1e-15)
    assert g.lipschitz == pytest.approx(1.128904, abs=1e-5)


def test_domain_error():
    with pytest.raises(A.DomainError):
        A.eval(A.get("tanh"), np.array([0.0, np.nan]))
    with pytest.raises(ValueError):
        A.get("relu")


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(A.NAMES), st.floats(-15, 15))
def test_finite_difference_agreement(name, x):
    act = A.get(name)
    h = 1e-5
    fd1 = (act.fn(np.array(x + h)) - act.fn(np.array(x - h))) / (2 * h)
    fd2 = (act.d1(np.array(x + h)) - act.d1(np.array(x - h))) / (2 * h)
    assert abs(fd1 - A.deriv(act, x)) <= 1e-6 * (1 + abs(fd1))
    assert abs(fd2 - A.deriv2(act, x)) <= 1e-6 * (1 + abs(fd2))
