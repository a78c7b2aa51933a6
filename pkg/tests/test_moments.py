import math

import numpy as np
import pytest

from kpzlab import asymptotics as asy
from kpzlab import moments
from kpzlab.errors import ParameterError
from kpzlab.validation import first_moment_oracle, second_moment_oracle


def exact_leading_log(p, t):
    # int e^{prt} aisq(t^{2/3} r) dr = t^{-7/6} p^{-3/2} e^{p^3 t/12} / (2 sqrt pi)
    return (math.lgamma(p + 1) - 1.5 * math.log(p) - 0.5 * math.log(t) + p**3 * t / 12
            - math.log(2 * math.sqrt(math.pi)))


def test_split_order():
    assert moments.split_order(0.5) == (1, 0.5)
    assert moments.split_order(2.0) == (3, 0.0)
    n, a = moments.split_order(1.3)
    assert n == 2 and a == pytest.approx(0.3)


@pytest.mark.parametrize("p,t", [(0.5, 1.0), (1.0, 3.0), (2.0, 10.0), (3.0, 200.0), (0.1, 0.5)])
def test_leading_term_closed_form(p, t):
    assert moments.leading_term(p, t).log == pytest.approx(exact_leading_log(p, t), rel=1e-12, abs=1e-12)


def test_leading_ratio_limit():
    log_ratio = moments.leading_term(1.0, 500.0).log - (math.lgamma(2.0) - 0.5 * math.log(500.0)
                                                       + 500.0 / 12)
    assert abs(math.exp(log_ratio) * 2 * math.sqrt(math.pi) - 1.0) <= 0.02


def test_leading_term_large_t_finite():
    v = moments.leading_term(4.0, 1e4)
    assert math.isfinite(v.log) and v.sign == 1.0


def test_leading_term_hat():
    vals = []
    for p in (0.5, 1.0, 2.0):
        for t in (1.0, 2.0, 4.0):
            a_hat = moments.leading_term_hat(p, t)
            assert a_hat > 0
            assert a_hat == pytest.approx(moments.leading_term_hat_closed_form(p, t), rel=1e-9)
            vals.append(a_hat / math.gamma(p + 1))
    assert max(vals) <= 10.0


def test_leading_term_hat_relative_size():
    r20 = moments.leading_term_hat(1.0, 20.0) / moments.leading_term(1.0, 20.0).value
    ratio = moments.leading_term_hat(1.0, 40.0) / moments.leading_term(1.0, 40.0).value
    assert ratio < r20
    assert ratio < 1e-3


def test_trace_derivative_sign():
    from kpzlab.fredholm import trace_exact
    from kpzlab.kernel import KernelParams
    for n in (1, 2, 3):
        for s in (1.0, 3.0, 50.0):
            assert (-1) ** (n + 1) * trace_exact(KernelParams(s, 2.0, n)) > 0


@pytest.mark.parametrize("t", [1.0, 2.0])
def test_first_moment(t):
    assert math.exp(moments.moment(1.0, t)) == pytest.approx(first_moment_oracle(t), rel=1e-3)


def test_first_moment_values():
    assert first_moment_oracle(1.0) == pytest.approx(0.306608, rel=1e-5)
    assert first_moment_oracle(2.0) == pytest.approx(0.235647, rel=1e-5)


@pytest.mark.parametrize("t", [1.0, 2.0])
def test_second_moment(t):
    assert math.exp(moments.moment(2.0, t)) == pytest.approx(second_moment_oracle(t), rel=1e-3)


def test_continuity_at_integer_p():
    lo, mid, hi = (moments.moment(p, 1.0) for p in (1.999, 2.0, 2.001))
    assert lo < mid < hi
    # linear interpolation through the neighbours
    assert abs(math.exp(0.5 * (lo + hi)) / math.exp(mid) - 1.0) < 1e-4


def test_log_moment_convex():
    logs = np.array([moments.moment(p, 2.0) for p in (0.5, 1.0, 1.5, 2.0)])
    assert np.all(np.diff(logs, 2) > 0)


def test_moment_range_checks():
    with pytest.raises(ParameterError):
        moments.moment(0.01, 1.0)
    with pytest.raises(ParameterError):
        moments.moment(1.0, 20.0)


def test_decomposition_identity():
    d = moments.decompose(1.3, 2.0)
    assert abs(d.reconstructed / d.total - 1.0) <= 1e-6
    assert d.n == 2 and len(d.higher) == 5


def test_tail_term_uniform():
    n, _ = moments.split_order(1.0)
    consts = [abs(moments.tail_term(1.0, t)) * 1.0 / n**n for t in (1.0, 4.0, 10.0)]
    assert max(consts) <= consts[0]


def test_remainder_dominance():
    p = 1.0
    rows = []
    for t in (2.0, 4.0, 8.0):
        rem = moments.remainder_terms(p, t, l_max=4)
        rows.append(np.abs(rem) / moments.leading_term(p, t).value)
    rows = np.array(rows)
    assert np.all(np.diff(rows, axis=0) < 0)


def test_remainder_global_envelope():
    p, t = 1.3, 4.0
    d = moments.decompose(p, t)
    lhs = abs(d.remainder_sum - d.leading_hat + d.tail_term)
    assert lhs <= 1e3 * asy.remainder_global_bound(p, t)
    assert asy.kappa(1.0) == 1.0 / 16.0


def test_slope_integer():
    assert moments.lyapunov_slope(2.0, [100.0, 150.0, 200.0]) == pytest.approx(2.0 / 3.0, rel=1e-2)


def test_rate_at_200_integer():
    assert moments.leading_term(2.0, 200.0).log / 200.0 == pytest.approx(2.0 / 3.0, rel=1e-2)


def test_slope_p1():
    assert moments.lyapunov_slope(1.0, [100.0, 150.0, 200.0]) == pytest.approx(1.0 / 12.0, rel=1e-2)


def test_slope_fractional():
    assert moments.lyapunov_slope(0.5, [100.0, 150.0, 200.0]) == pytest.approx(1.0 / 96.0, rel=2e-2)


def test_slope_grid_checks():
    with pytest.raises(ParameterError):
        moments.lyapunov_slope(1.0, [1.0, 2.0])
