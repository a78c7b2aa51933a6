import math

import numpy as np
import pytest

from kpzlab.errors import DomainError, ParameterError
from kpzlab.fredholm import build_discretization, nystrom_matrix
from kpzlab.kernel import KernelParams, fermi_weight, kernel_eval, kernel_weight, log_weight
from kpzlab.specfun import aisq


def test_params_validation():
    with pytest.raises(ParameterError):
        KernelParams(0.0, 1.0)
    with pytest.raises(ParameterError):
        KernelParams(1.0, -1.0)
    with pytest.raises(ParameterError):
        KernelParams(1.0, 1.0, 1.5)
    with pytest.raises(ParameterError):
        KernelParams(1.0, 1.0, 13)


def test_weight_values():
    assert fermi_weight(KernelParams(1.0, 3.0), 0.0) == 0.5
    assert fermi_weight(KernelParams(1.0, 3.0), 1e4) == 1.0
    assert fermi_weight(KernelParams(1.0, 3.0), -1e4) == 0.0
    for t in (0.5, 1.0, 7.0):
        assert fermi_weight(KernelParams(1.0, t, 1), 0.0) == pytest.approx(0.25, rel=1e-15)
    with pytest.raises(DomainError):
        fermi_weight(KernelParams(1.0, 1.0), math.inf)


def test_weight_extreme_arguments_do_not_overflow():
    for order in range(0, 6):
        sign, lw = log_weight(order, math.log(1e-200), np.array([-1e3, 0.0, 1e3]))
        assert np.all(np.isfinite(lw))


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_weight_derivative_against_finite_difference(order):
    t, r, s, h = 2.0, 0.3, 0.8, 1e-4
    lo = kernel_weight(KernelParams(s - h, t, order - 1), r)
    hi = kernel_weight(KernelParams(s + h, t, order - 1), r)
    fd = (hi - lo) / (2 * h)
    assert kernel_weight(KernelParams(s, t, order), r) == pytest.approx(fd, rel=1e-6)
    assert (-1) ** (order - 1) * kernel_weight(KernelParams(s, t, order), r) > 0


def test_kernel_vanishes_for_tiny_s():
    assert abs(kernel_eval(KernelParams(1e-300, 1.0), 0.2, 0.5)) < 1e-200


def test_kernel_two_representations_agree():
    for order in (0, 1, 3):
        p = KernelParams(0.5, 2.0, order)
        a = kernel_eval(p, 0.3, 0.7)
        b = kernel_eval(p, 0.3, 0.7, form="K.")
        assert abs(a - b) <= 1e-10 * max(1.0, abs(a))


def test_kernel_symmetric():
    p = KernelParams(2.0, 1.5, 2)
    assert kernel_eval(p, 0.4, 2.0) == kernel_eval(p, 2.0, 0.4)


def test_kernel_diagonal_below_aisq():
    p = KernelParams(1.0, 1.0)
    for x in np.linspace(0.0, 20.0, 21):
        assert kernel_eval(p, x, x) <= aisq(x) + 1e-300


def test_kernel_airy_limit_at_large_t():
    # indicator limit of the weight at sigma = 0
    v = kernel_eval(KernelParams(1.0, 1000.0), 0.0, 0.0)
    assert abs(v - aisq(0.0)) <= 1e-3


@pytest.mark.parametrize("s,t", [(0.01, 0.5), (1.0, 1.0), (30.0, 1.0), (0.2, 6.0), (5.0, 3.0)])
def test_nystrom_sign_definite(s, t):
    disc = build_discretization(t, node_count=100)
    for order in range(4):
        m = nystrom_matrix(KernelParams(s, t, order), disc)
        sign = 1.0 if order == 0 else (-1.0) ** (order - 1)
        assert np.linalg.eigvalsh(sign * m)[0] >= -1e-10
