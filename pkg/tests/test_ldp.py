import math

import numpy as np
import pytest

from kpzlab import ldp
from kpzlab.asymptotics import crossover_rate, phi_plus
from kpzlab.errors import DomainError, EvaluationError, ParameterError

YS = np.geomspace(0.05, 5.0, 51)


def test_chernoff_values():
    val, arg = ldp.chernoff_rate(1.0, return_argmin=True)
    assert val == pytest.approx(-4.0 / 3.0, abs=1e-12)
    assert arg == pytest.approx(2.0, abs=1e-5)
    assert ldp.chernoff_rate(0.25) == pytest.approx(-1.0 / 6.0, abs=1e-12)
    for y in (0.1, 0.5, 2.0):
        assert abs(ldp.chernoff_rate(y) + phi_plus(y)) <= 1e-8


def test_chernoff_grid():
    assert max(abs(ldp.chernoff_rate(y) + phi_plus(y)) for y in YS) <= 1e-8


def test_tilted_minimiser():
    # the tilt q* = 2 sqrt(y + eps) approaches the Chernoff minimiser as eps -> 0
    y = 0.7
    _, arg = ldp.chernoff_rate(y, return_argmin=True)
    gaps = [abs(2 * math.sqrt(y + eps) - arg) for eps in (1e-1, 1e-2, 1e-4)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-3


def test_bad_y():
    with pytest.raises(DomainError):
        ldp.chernoff_rate(0.0)
    with pytest.raises(DomainError):
        ldp.chernoff_rate(math.nan)


def test_rate_report():
    r = ldp.rate_report(1.0)
    assert (r.phi, r.crossover) == (pytest.approx(4 / 3), pytest.approx(-11 / 12))
    assert r.tail_log_estimate is None


def test_variational_values():
    base = ldp.blended_phi(1.0)
    assert ldp.variational_value(base, 0.1) == pytest.approx(-4.0 / 3.0 * 0.1**1.5, abs=1e-6)
    assert ldp.variational_value(base, 1.0) == pytest.approx(1.0 / 12.0 - 1.0, abs=1e-6)
    ys = list(YS) + [0.25]
    assert max(abs(ldp.variational_value(base, y) - ldp.variational_rhs(y)) for y in ys) <= 1e-6


def test_variational_perturbation():
    def phi(xi):
        xi = np.asarray(xi, dtype=float)
        upper = 4.0 / 3.0 * xi**1.5
        mid = 0.5 * (upper + xi - 1.0 / 12.0)
        return np.where(xi <= 0.25, upper, mid)

    for y in (0.1, 1.0):
        assert abs(ldp.variational_value(phi, y) - crossover_rate(y)) <= 1e-6


def test_variational_reports_bad_phi():
    with pytest.raises(EvaluationError):
        ldp.variational_value(lambda xi: np.where(xi > 2, np.nan, xi), 1.0)


def test_blend_corridor():
    xi = np.linspace(0.26, 5.0, 100)
    for blend in (0.0, 0.3, 1.0):
        v = ldp.blended_phi(blend)(xi)
        assert np.all(v >= xi - 1.0 / 12.0 - 1e-15)
        assert np.all(v <= 4.0 / 3.0 * xi**1.5 + 1e-15)
    with pytest.raises(ParameterError):
        ldp.blended_phi(1.5)


def test_nonuniqueness():
    ys = [0.05, 0.2, 0.5, 1.0, 3.0]
    rows = ldp.nonuniqueness_demo(ys, 1.0)
    assert all(r["difference"] == 0.0 for r in rows)
    for blend in (0.0, 0.25, 0.5, 0.75):
        rows = ldp.nonuniqueness_demo(ys, blend)
        assert max(abs(r["difference"]) for r in rows) <= 1e-6
        assert [r["y"] for r in rows] == ys


def test_tail_estimate_analytic():
    t = 6.0
    for y in (0.3, 0.5, 1.0):
        est = ldp.tail_estimate(y, t, lambda p: p**3 * t / 12.0)
        assert abs(est - ldp.chernoff_rate(y)) <= 1e-4


def test_tail_estimate_small_y():
    t = 6.0
    vals = [ldp.tail_estimate(y, t, lambda p: p**3 * t / 12.0) for y in (1e-2, 1e-3, 1e-4)]
    assert all(v <= 0 for v in vals)
    assert vals[0] < vals[1] <= vals[2] and abs(vals[-1]) < 1e-4
