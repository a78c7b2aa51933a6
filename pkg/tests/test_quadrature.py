import math

import numpy as np
import pytest

from kpzlab.errors import ConvergenceError, EvaluationError, ParameterError
from kpzlab.quadrature import (gauss_legendre_rule, integrate, integrate_decaying,
                               integrate_with_error)
from kpzlab.specfun import aisq


def test_small_rules():
    r1 = gauss_legendre_rule(1)
    assert list(r1.nodes) == [0.0] and list(r1.weights) == [2.0]
    r2 = gauss_legendre_rule(2)
    assert np.allclose(r2.nodes, [-1 / math.sqrt(3), 1 / math.sqrt(3)], atol=1e-15)
    assert np.allclose(r2.weights, [1.0, 1.0], atol=1e-15)


def test_rule_exactness_and_symmetry():
    r = gauss_legendre_rule(64)
    assert abs(np.dot(r.weights, r.nodes**126) - 2.0 / 127.0) <= 1e-13
    assert np.array_equal(r.nodes, -r.nodes[::-1])
    assert np.array_equal(r.weights, r.weights[::-1])
    assert r is gauss_legendre_rule(64)
    with pytest.raises(ValueError):
        r.nodes[0] = 1.0


def test_bad_order():
    with pytest.raises(ParameterError):
        gauss_legendre_rule(0)


def test_integrate_basic():
    assert integrate(lambda x: x**2, 0.0, 1.0) == pytest.approx(1.0 / 3.0, rel=1e-15)
    v = integrate(lambda x: np.exp(-x), 0.0, 50.0, panels=50, order=20)
    assert abs(v - (1.0 - math.exp(-50.0))) <= 1e-12
    from kpzlab.specfun import airy_arrays
    v = integrate(lambda x: airy_arrays(x)[0] ** 2, 0.0, 40.0, panels=20)
    assert abs(v - aisq(0.0)) <= 1e-10


def test_integrate_reports_bad_node():
    with pytest.raises(EvaluationError) as err, np.errstate(divide="ignore"):
        integrate(lambda x: 1.0 / (x - x[3]), 0.0, 1.0)
    assert err.value.node is not None
    with pytest.raises(ParameterError):
        integrate(np.sin, 1.0, 0.0)


@pytest.mark.parametrize("f", [np.cos, lambda x: np.exp(np.sin(3 * x)), lambda x: 1 / (1 + x * x)])
def test_doubling_within_error_estimate(f):
    v, err = integrate_with_error(f, -2.0, 3.0, panels=2, order=8)
    v2, _ = integrate_with_error(f, -2.0, 3.0, panels=4, order=8)
    assert abs(v2 - v) <= 10 * err + 1e-15


def test_integrate_decaying():
    assert integrate_decaying(lambda x: np.exp(-x), 0.0, 1.0, 1e-12) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ConvergenceError):
        integrate_decaying(lambda x: np.ones_like(x), 0.0, 1.0, 1e-12, max_panels=64)


def test_integrate_decaying_airy_tail_against_trapezoid():
    t, q = 4.0, 1.0
    a = q * q / 4.0

    def f(r):
        r = np.atleast_1d(r)
        return np.exp(r * t) * np.array([aisq(t ** (2.0 / 3.0) * v) for v in r])

    val = integrate_decaying(f, a, decay_rate=1.0, tol=1e-14, panel_width=0.25)
    x = np.linspace(a, a + 12.0, 1_000_001)
    from kpzlab.specfun import log_aisq
    y = np.exp(x * t + log_aisq(t ** (2.0 / 3.0) * x))
    trap = float(np.sum((y[1:] + y[:-1]) * 0.5 * np.diff(x)))
    assert abs(val - trap) <= 1e-8 * abs(trap)
