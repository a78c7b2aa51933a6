"""Asymptotic profiles and bound envelopes.

Every envelope here is a shape with its constant set to 1.  Comparison with
a numerically computed quantity goes through :func:`calibrate`, which
records the smallest constant that makes the inequality hold on a grid and
whether that constant stays under a prescribed cap.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParameterError
from .fredholm import log_trace_exact
from .kernel import KernelParams
from .moments import log_exp_aisq_integral, split_order


@dataclass
class BoundReport:
    name: str
    grid: list
    lhs: list
    rhs: list
    calibrated_constant: float
    satisfied: bool
    two_sided: bool = False
    cap: float | None = None
    extra: dict = field(default_factory=dict)

    def rows(self):
        """One ``(point, lhs, rhs)`` tuple per grid point."""
        return list(zip(self.grid, self.lhs, self.rhs))


def calibrate(name, grid, lhs, rhs, two_sided=False, cap=None, log_space=False):
    """Smallest C with lhs <= C rhs (and rhs <= C lhs if ``two_sided``).

    With ``log_space`` the inputs are logarithms, which keeps enormous
    envelopes comparable; the report stores them as given.
    """
    lhs = [float(v) for v in lhs]
    rhs = [float(v) for v in rhs]
    if len(lhs) != len(rhs) or len(lhs) != len(grid) or not lhs:
        raise ParameterError("grid, lhs and rhs must be nonempty and of equal length")
    if log_space:
        log_ratio = np.array(lhs) - np.array(rhs)
    else:
        a, b = np.abs(lhs), np.abs(rhs)
        if np.any(b == 0) or (two_sided and np.any(a == 0)):
            raise DomainError("cannot calibrate against a vanishing envelope")
        with np.errstate(divide="ignore"):
            log_ratio = np.log(a) - np.log(b)
    log_c = float(np.max(log_ratio))
    if two_sided:
        log_c = max(log_c, float(np.max(-log_ratio)))
    const = math.exp(log_c)
    ok = np.all(log_ratio <= log_c + 1e-12)
    if two_sided:
        ok = ok and np.all(-log_ratio <= log_c + 1e-12)
    if cap is not None:
        ok = ok and const <= cap
    return BoundReport(name, list(grid), lhs, rhs, const, bool(ok), two_sided, cap)


# ---------------------------------------------------------------------------
# profiles


def u_profile(q, x):
    """U_q(x) = q x^2 - (4/3) x^3."""
    x = np.asarray(x, dtype=float)
    out = q * x * x - 4.0 / 3.0 * x**3
    return float(out) if out.ndim == 0 else out


def phi_plus(y):
    """Upper-tail rate function (4/3) y^{3/2}."""
    y_arr = np.asarray(y, dtype=float)
    if np.any(~(y_arr > 0)) or not np.all(np.isfinite(y_arr)):
        raise DomainError(f"phi_plus requires finite y > 0, got {y!r}")
    out = 4.0 / 3.0 * y_arr**1.5
    return float(out) if out.ndim == 0 else out


def crossover_rate(y):
    """Exponential rate of the first trace term: -(4/3) y^{3/2} up to 1/4, then 1/12 - y."""
    y_arr = np.asarray(y, dtype=float)
    if np.any(~(y_arr > 0)):
        raise DomainError(f"crossover_rate requires y > 0, got {y!r}")
    out = np.where(y_arr <= 0.25, -4.0 / 3.0 * np.abs(y_arr) ** 1.5, 1.0 / 12.0 - y_arr)
    return float(out) if out.ndim == 0 else out


def _clip_point(y, q):
    """min{sqrt(y), q/2}, choosing sqrt(y) on ties."""
    r = math.sqrt(y) if math.isfinite(y) else math.inf
    return r if r <= q / 2.0 else q / 2.0


# ---------------------------------------------------------------------------
# Airy-Laplace integrals


def _as_list(v):
    return [float(x) for x in np.atleast_1d(v)]


def log_sandwich_envelope(q, t):
    return -7.0 / 6.0 * math.log(t) - 1.5 * math.log(q) + q**3 * t / 12.0


def airy_laplace_sandwich(q, t, cap=None):
    """Two-sided comparison of int e^{qrt} aisq(t^{2/3} r) dr with t^{-7/6} q^{-3/2} e^{q^3 t/12}.

    ``q`` and ``t`` may be scalars or sequences (the grid is their product).
    Values are carried as logarithms.
    """
    grid, lhs, rhs = [], [], []
    for q_, t_ in itertools.product(_as_list(q), _as_list(t)):
        if q_ < 0.25 or t_ < 0.25:
            raise ParameterError(f"need q, t >= 0.25, got q={q_}, t={t_}")
        grid.append((q_, t_))
        lhs.append(log_exp_aisq_integral(q_, t_))
        rhs.append(log_sandwich_envelope(q_, t_))
    rep = calibrate("airy_laplace_sandwich", grid, lhs, rhs, two_sided=True, cap=cap,
                    log_space=True)
    rep.extra["ratios"] = [math.exp(a - b) for a, b in zip(lhs, rhs)]
    return rep


def log_partial_envelope(q, t, y):
    return -5.0 / 6.0 * math.log(t) + t * u_profile(q, _clip_point(y, q))


def airy_laplace_partial(q, t, y, cap=None):
    """int_{-inf}^{y} e^{qrt} aisq(t^{2/3} r) dr against t^{-5/6} exp(t U_q(min{sqrt y, q/2})).

    ``y = inf`` integrates over the whole line.  Values are logarithms.
    """
    grid, lhs, rhs = [], [], []
    for q_, t_, y_ in itertools.product(_as_list(q), _as_list(t), _as_list(y)):
        if q_ < 0.25 or t_ < 0.25:
            raise ParameterError(f"need q, t >= 0.25, got q={q_}, t={t_}")
        if not y_ >= 0:
            raise DomainError(f"y must be nonnegative, got {y_}")
        grid.append((q_, t_, y_))
        lhs.append(log_exp_aisq_integral(q_, t_, upper=y_))
        rhs.append(log_partial_envelope(q_, t_, y_))
    return calibrate("airy_laplace_partial", grid, lhs, rhs, cap=cap, log_space=True)


# ---------------------------------------------------------------------------
# trace and remainder envelopes


def log_trace_bound(sigma, t, n):
    if sigma < 0:
        raise DomainError(f"sigma must be nonnegative, got {sigma}")
    if t < 0.25:
        raise ParameterError(f"need t >= 0.25, got {t}")
    if n == 0:
        return t * u_profile(1.0, _clip_point(sigma, 1.0)) - t * sigma
    return math.lgamma(n + 1.0) + t * u_profile(float(n), _clip_point(sigma, float(n)))


def trace_bound(sigma, t, n):
    """Envelope for |tr K^{(n)}| at s = e^{-t sigma} (constant 1)."""
    if isinstance(n, bool) or int(n) != n or n < 0:
        raise ParameterError(f"n must be a nonnegative integer, got {n!r}")
    return math.exp(log_trace_bound(float(sigma), float(t), int(n)))


def kappa(p):
    """Exponent gap min{1/6, p^3/16}."""
    return min(1.0 / 6.0, p**3 / 16.0)


def log_remainder_global_bound(p, t, c=1.0):
    if p < 0.25 or t < 0.25:
        raise ParameterError(f"need p, t >= 0.25, got p={p}, t={t}")
    n, _ = split_order(p)
    return (math.log(n) + 2.0 * math.lgamma(n + 1.0) + n * math.log(n * c)
            + 0.5 * math.log(t) + (p**3 / 12.0 - kappa(p)) * t)


def remainder_global_bound(p, t, c=1.0):
    """n (n!)^2 (n C)^n t^{1/2} e^{p^3 t/12 - kappa_p t}."""
    return math.exp(log_remainder_global_bound(float(p), float(t), float(c)))


def trace_rate_extrapolation(y, t_pair=(40.0, 80.0)):
    """Estimate lim (1/t) log tr K_{e^{-ty}, t} from two times.

    The polynomial prefactor of the trace (t^{-1} for y <= 1/4, where the
    integrand peaks at the weight's kink, and t^{-1/2} beyond, where the peak
    is interior) is divided out and the remaining O(1/t) term is removed by
    linear extrapolation in 1/t.
    """
    y = float(y)
    if not y > 0:
        raise DomainError(f"y must be positive, got {y!r}")
    t1, t2 = (float(v) for v in t_pair)
    if not 0 < t1 < t2:
        raise ParameterError(f"need 0 < t1 < t2, got {t_pair!r}")
    power = 1.0 if y <= 0.25 else 0.5
    g = [log_trace_exact(KernelParams(math.exp(-t * y), t))[1] / t + power * math.log(t) / t
         for t in (t1, t2)]
    return (t2 * g[1] - t1 * g[0]) / (t2 - t1)
