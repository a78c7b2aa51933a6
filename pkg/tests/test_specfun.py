import math

import numpy as np
import pytest

from kpzlab.errors import DomainError
from kpzlab.quadrature import integrate
from kpzlab.specfun import (airy_arrays, airy_pair, airy_reference, airy_series, aisq,
                            aisq_tail_integral, log_aisq, log_gamma)

AI0 = 3.0 ** (-2.0 / 3.0) / math.gamma(2.0 / 3.0)
AIP0 = -(3.0 ** (-1.0 / 3.0)) / math.gamma(1.0 / 3.0)


def test_airy_at_origin():
    v = airy_pair(0.0)
    assert v.ai == pytest.approx(AI0, rel=1e-14)
    assert v.ai_prime == pytest.approx(AIP0, rel=1e-14)
    assert v.ai == pytest.approx(0.355028, abs=1e-6)


def test_airy_underflow():
    v = airy_pair(200.0)
    assert v.ai == 0.0 and v.ai_prime == 0.0


@pytest.mark.parametrize("x", [-2.0, -7.3, -0.4, 1.1, 5.0])
def test_airy_matches_series(x):
    ref = airy_series(x)
    v = airy_pair(x)
    assert abs(v.ai - ref.ai) <= 1e-10
    assert abs(v.ai_prime - ref.ai_prime) <= 1e-10


@pytest.mark.parametrize("x", np.linspace(-40.0, 30.0, 57))
def test_reference_agrees_with_production(x):
    ref = airy_reference(x)
    ai, aip = airy_arrays(x)
    scale = max(1.0, abs(x)) ** 0.25
    assert abs(ref.ai - ai) <= 1e-12 * scale
    assert abs(ref.ai_prime - aip) <= 1e-12 * scale * max(1.0, abs(x)) ** 0.5


def test_airy_rejects_bad_input():
    with pytest.raises(DomainError):
        airy_pair(math.nan)
    with pytest.raises(DomainError):
        airy_pair(2e4)


def test_aisq_at_origin():
    assert aisq(0.0) == pytest.approx(AIP0**2, rel=1e-13)
    assert aisq(0.0) == pytest.approx(0.0669873, abs=5e-7)
    quad = integrate(lambda x: airy_arrays(x)[0] ** 2, 0.0, 40.0, panels=40)
    assert abs(quad - aisq(0.0)) <= 1e-12


def test_aisq_upper_and_lower_envelopes():
    y = np.arange(0.0, 30.0001, 0.1)
    vals = np.array([aisq(v) for v in y])
    ratio = vals * (y + 1.0) / np.exp(-4.0 / 3.0 * y**1.5)
    c_up = float(np.max(ratio))
    assert c_up <= 5.0
    assert aisq(30.0) <= 1e-90
    low = np.array([aisq(-v) for v in y])
    c_low = max(float(np.max(np.sqrt(y) / low)), float(np.max(low / (np.sqrt(y) + 1.0))))
    assert c_low <= 5.0


def test_aisq_lower_envelope_constant_at_minus_100():
    # sqrt(100)/C <= aisq(-100) <= C (sqrt(100) + 1) with C <= 2
    big = aisq(-100.0)
    c = max(10.0 / big, big / 11.0)
    assert c <= 2.0


def test_aisq_monotone():
    y = np.linspace(-50.0, 30.0, 1000)
    vals = np.array([aisq(v) for v in y])
    assert np.all(np.diff(vals) < 0)


@pytest.mark.parametrize("y", np.linspace(-10.0, 10.0, 21))
def test_aisq_quadrature_consistency(y):
    quad = integrate(lambda x: airy_arrays(x)[0] ** 2, y, y + 40.0, panels=80)
    assert abs(aisq(y) - quad) <= 1e-10


def test_log_aisq_deep_tail():
    assert math.isfinite(log_aisq(500.0))
    assert log_aisq(20.0) == pytest.approx(math.log(aisq(20.0)), rel=1e-12)


def test_aisq_tail_integral():
    assert aisq_tail_integral(0.0) == pytest.approx(-AI0 * AIP0 / 3.0, rel=1e-13)
    assert aisq_tail_integral(0.0) == pytest.approx(0.030629, abs=1e-6)
    quad = integrate(aisq, 20.0, 60.0, panels=40, vectorized=False)
    assert aisq_tail_integral(20.0) == pytest.approx(quad, rel=1e-8)
    assert aisq_tail_integral(1e3) == 0.0 or aisq_tail_integral(1e3) < 1e-300


def test_log_gamma():
    assert log_gamma(1.0) == 0.0
    assert log_gamma(5.0) == pytest.approx(math.log(24.0), rel=1e-15)
    assert log_gamma(0.5) == pytest.approx(0.5 * math.log(math.pi), rel=1e-15)
    with pytest.raises(DomainError):
        log_gamma(0.0)
