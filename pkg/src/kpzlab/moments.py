"""Fractional moments of U = Z(2t,0) e^{t/12} and their decomposition.

For p = n - 1 + alpha with n = floor(p) + 1,

    E[U^p] = (-1)^n / Gamma(1 - alpha) * int_0^inf s^{-alpha} D^{(n)}(s) ds,

with D(s) = E[e^{-sU}] the Fredholm determinant.  The s-integral is split
at s = 1.  On (0, 1] we substitute s = e^{-t sigma}, so that
s^{-alpha} ds = t e^{-t(1-alpha) sigma} d sigma and the endpoint singularity
disappears; the remaining piece near s = 0 is integrated against the Taylor
polynomial of D^{(n)}.  On [1, inf) the substitution s = e^{lambda} is used and
the integrand decays faster than any power of s.

All determinant derivatives for one t are computed once on a shared node set
(:class:`LaplaceSweep`) and reused for every p.
"""

from __future__ import annotations

import math
import threading
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import ConvergenceError, ParameterError
from .fredholm import (Discretization, build_discretization, det_taylor,
                       exterior_from_series, log_trace_batch, reduced_series)
from .kernel import KernelParams
from .quadrature import gauss_legendre_rule, log_integrate_positive
from .specfun import log_aisq

P_MIN, P_MAX = 0.05, 4.0
T_MIN, T_MAX = 0.1, 12.0
# derivative orders carried by a sweep: n <= 5 plus two Taylor-tail terms
SWEEP_ORDER = 7
PANEL_ORDER = 16
REL_TOL = 1e-14


@dataclass(frozen=True)
class LogValue:
    """A real number stored as sign and log-magnitude."""

    sign: float
    log: float

    @property
    def value(self):
        return self.sign * math.exp(self.log)


@dataclass
class MomentDecomposition:
    p: float
    t: float
    n: int
    alpha: float
    leading: float
    leading_hat: float
    tail_term: float
    higher: list
    total: float

    @property
    def reconstructed(self):
        return self.leading - self.leading_hat + self.tail_term + float(np.sum(self.higher))

    @property
    def remainder_sum(self):
        return float(np.sum(self.higher))


def split_order(p):
    """Return ``(n, alpha)`` with n = floor(p) + 1 and alpha = p - floor(p)."""
    p = float(p)
    fl = math.floor(p)
    return int(fl) + 1, p - fl


def _check_p(p, lo=P_MIN, hi=math.inf):
    if not (math.isfinite(p) and lo <= p <= hi):
        raise ParameterError(f"p must lie in [{lo}, {hi}], got {p!r}")


def _check_t(t, lo=0.1, hi=math.inf):
    if not (math.isfinite(t) and lo <= t <= hi):
        raise ParameterError(f"t must lie in [{lo}, {hi}], got {t!r}")


# ---------------------------------------------------------------------------
# leading term


def log_exp_aisq_integral(q, t, upper=math.inf):
    """log of int_{-inf}^{upper} e^{q r t} aisq(t^{2/3} r) dr, in log space."""
    q, t = float(q), float(t)
    t13 = t ** (1.0 / 3.0)
    t23 = t13 * t13

    def logf(r):
        return q * r * t + log_aisq(t23 * r)

    peak = q * q / 4.0
    y_peak = max(t23 * peak, 1e-3)
    sd = y_peak**0.25 / t23
    width = min(0.3 * sd, 0.5 / (q * t))
    center = min(peak, upper)
    return log_integrate_positive(logf, center, width, rel_tol=1e-18, upper=upper)


def leading_term(p, t):
    """A_p(t) = t^{2/3} Gamma(p+1) int e^{prt} aisq(t^{2/3} r) dr, as a LogValue."""
    p, t = float(p), float(t)
    _check_p(p)
    _check_t(t)
    log_val = (2.0 / 3.0) * math.log(t) + math.lgamma(p + 1.0) + log_exp_aisq_integral(p, t)
    return LogValue(1.0, log_val)


def leading_term_hat(p, t, disc=None):
    """A-hat_p(t): the s in [1, inf) part of the leading trace integral.

    Integrates (-1)^{n+1} s^{-alpha} d^n_s tr K_{s,t} over s = e^{lambda},
    lambda >= 0, with the exact trace integral at every node.  ``disc`` is
    accepted for interface symmetry; the traces do not need it.
    """
    p, t = float(p), float(t)
    _check_p(p)
    _check_t(t)
    n, alpha = split_order(p)
    rule = gauss_legendre_rule(PANEL_ORDER)
    width = 1.0
    total = 0.0
    for k in range(400):
        a = k * width
        lam = a + 0.5 * width * (rule.nodes + 1.0)
        w = 0.5 * width * rule.weights
        # (-1)^{n+1} d^n tr is positive; only the log magnitude is needed
        vals = np.exp((1.0 - alpha) * lam + log_trace_batch(n, lam, t))
        part = float(np.dot(w, vals))
        total += part
        # integrand decays at least like e^{-p lambda}: geometric tail bound
        tail = vals[-1] / p
        if part <= REL_TOL * total and tail <= 1e-13 * total:
            return total / math.gamma(1.0 - alpha)
    raise ConvergenceError(f"A-hat integral did not converge at p={p}, t={t}")


def leading_term_hat_closed_form(p, t):
    """A-hat_p(t) via the incomplete beta function (independent of the s-integral).

    Exchanging the s- and r-integrals gives
    Gamma(p+1) t^{2/3} int e^{prt} aisq(t^{2/3} r) I_{a/(1+a)}(p+1, 1-alpha) dr
    with a = e^{-rt}.
    """
    p, t = float(p), float(t)
    n, alpha = split_order(p)
    t23 = t ** (2.0 / 3.0)

    def logf(r):
        r = np.asarray(r, dtype=float)
        # a / (1 + a) = 1 / (1 + e^{rt})
        x = special.expit(-r * t)
        ib = special.betainc(p + 1.0, 1.0 - alpha, x)
        with np.errstate(divide="ignore"):
            lib = np.log(ib)
        # for large rt use the small-x expansion to avoid underflow
        small = x < 1e-280
        if np.any(small):
            lx = -np.logaddexp(0.0, r[small] * t)
            lib[small] = ((p + 1.0) * lx - math.log(p + 1.0)
                          - special.betaln(p + 1.0, 1.0 - alpha))
        return p * r * t + log_aisq(t23 * r) + lib

    center = 0.0
    width = min(0.25, 0.5 / (p * t), 0.5 / t23)
    log_int = log_integrate_positive(logf, center, width, rel_tol=1e-18)
    return math.exp(math.lgamma(p + 1.0) + math.log(t23) + log_int)


# ---------------------------------------------------------------------------
# shared determinant sweep


def moment_discretization(t, node_count=300):
    """Discretisation adequate for the full s-range of the moment integral."""
    t13 = float(t) ** (1.0 / 3.0)
    return build_discretization(t, shift_hint=-(8.0 + 5.0 / t13), node_count=node_count)


@dataclass
class _Panel:
    nodes: np.ndarray  # in the log variable (lambda or t*sigma)
    weights: np.ndarray
    dets: np.ndarray  # shape (len(nodes), SWEEP_ORDER + 1)


@dataclass
class LaplaceSweep:
    """Determinant derivatives on shared panels in log s, for one t.

    Leg ``"lower"`` covers s = e^{-l} in (0, 1]; leg ``"upper"`` covers
    s = e^{l} in [1, inf).  Panels are evaluated lazily.
    """

    t: float
    disc: Discretization
    width: float = field(init=False)
    _panels: dict = field(default_factory=dict, repr=False)
    _edges: dict = field(default_factory=dict, repr=False)
    _ext_panels: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        self.width = 0.75 * max(1.0, math.sqrt(self.t))

    def _point(self, s):
        red = reduced_series(KernelParams(s, self.t), self.disc, SWEEP_ORDER)
        coefs = det_taylor(red, -1.0)
        return coefs * np.array([math.factorial(k) for k in range(SWEEP_ORDER + 1)])

    def panel(self, leg, k):
        key = (leg, k)
        with self._lock:
            cached = self._panels.get(key)
        if cached is not None:
            return cached
        rule = gauss_legendre_rule(PANEL_ORDER)
        a = k * self.width
        lam = a + 0.5 * self.width * (rule.nodes + 1.0)
        w = 0.5 * self.width * rule.weights
        sign = -1.0 if leg == "lower" else 1.0
        panel = _Panel(lam, w, np.array([self._point(math.exp(sign * li)) for li in lam]))
        with self._lock:
            self._panels[key] = panel
        return panel

    def edge(self, k):
        """Derivatives at s = e^{-k width}, the inner edge of lower panel k."""
        with self._lock:
            cached = self._edges.get(k)
        if cached is None:
            cached = self._point(math.exp(-k * self.width))
            with self._lock:
                self._edges[k] = cached
        return cached

    def exterior_panel(self, k, order, l_max):
        """``ext[i, L-1, m]`` = d^m_s tr(K^{wedge L}) at the nodes of lower panel k."""
        key = (k, order, l_max)
        with self._lock:
            cached = self._ext_panels.get(key)
        if cached is not None:
            return cached
        base = self.panel("lower", k)
        ext = np.array([
            exterior_from_series(reduced_series(KernelParams(math.exp(-li), self.t), self.disc, order),
                                 order, l_max)
            for li in base.nodes])
        with self._lock:
            self._ext_panels[key] = ext
        return ext


_sweep_cache: OrderedDict = OrderedDict()
_sweep_lock = threading.Lock()


def get_sweep(t, disc=None):
    """Cached :class:`LaplaceSweep` for ``(t, disc)``."""
    t = float(t)
    if disc is None:
        key = (t, "default")
    else:
        key = (t, id(disc))
    with _sweep_lock:
        sweep = _sweep_cache.get(key)
        if sweep is None or (disc is not None and sweep.disc is not disc):
            sweep = LaplaceSweep(t, disc if disc is not None else moment_discretization(t))
            _sweep_cache[key] = sweep
            while len(_sweep_cache) > 8:
                _sweep_cache.popitem(last=False)
        else:
            _sweep_cache.move_to_end(key)
    return sweep


def _tail_near_zero(derivs, n, alpha, s0):
    """int_0^{s0} s^{-alpha} D^{(n)}(s) ds from the Taylor expansion at s0.

    Returns ``(value, last_term)``.
    """
    total = 0.0
    last = 0.0
    for j in range(0, len(derivs) - n):
        # int_0^{s0} s^{-alpha} (s - s0)^j ds = (-1)^j s0^{j+1-alpha} B(1-alpha, j+1)
        coef = (-1.0) ** j * s0 ** (j + 1.0 - alpha) * special.beta(1.0 - alpha, j + 1.0)
        last = derivs[n + j] * coef / math.factorial(j)
        total += last
    return total, abs(last)


def lower_integral(sweep, n, alpha, max_panels=200):
    """int_0^1 s^{-alpha} D^{(n)}(s) ds on the sweep."""
    total = 0.0
    for k in range(max_panels):
        panel = sweep.panel("lower", k)
        f = np.exp(-(1.0 - alpha) * panel.nodes) * panel.dets[:, n]
        total += float(np.dot(panel.weights, f))
        tail, last = _tail_near_zero(sweep.edge(k + 1), n, alpha, math.exp(-(k + 1) * sweep.width))
        if last <= REL_TOL * abs(total + tail):
            return total + tail
    raise ConvergenceError(f"lower s-integral did not converge (n={n}, alpha={alpha}, t={sweep.t})")


def upper_integral(sweep, n, alpha, max_panels=200):
    """int_1^inf s^{-alpha} D^{(n)}(s) ds on the sweep."""
    total = 0.0
    quiet = 0
    for k in range(max_panels):
        panel = sweep.panel("upper", k)
        f = np.exp((1.0 - alpha) * panel.nodes) * panel.dets[:, n]
        part = float(np.dot(panel.weights, f))
        total += part
        if abs(part) <= REL_TOL * abs(total) and abs(f[-1]) <= REL_TOL * abs(total):
            quiet += 1
            if quiet >= 2:
                return total
        else:
            quiet = 0
    raise ConvergenceError(f"upper s-integral did not converge (n={n}, alpha={alpha}, t={sweep.t})")


def exterior_lower_integrals(sweep, n, alpha, l_max, max_panels=200):
    """int_0^1 s^{-alpha} d^n_s tr(K^{wedge L}) ds for L = 1..l_max."""
    total = np.zeros(l_max)
    for k in range(max_panels):
        panel = sweep.panel("lower", k)
        ext = sweep.exterior_panel(k, n + 1, l_max)
        f = np.exp(-(1.0 - alpha) * panel.nodes)[:, None] * ext[:, :, n]
        total += panel.weights @ f
        # two-term Taylor tail at the inner edge; the next term bounds the error
        s0 = math.exp(-(k + 1) * sweep.width)
        edge = ext[-1]  # node closest to s0
        tail = (edge[:, n] * s0 ** (1.0 - alpha) / (1.0 - alpha)
                - edge[:, n + 1] * s0 ** (2.0 - alpha) * special.beta(1.0 - alpha, 2.0))
        scale = max(np.max(np.abs(total)), 1e-300)
        err = np.abs(edge[1:, n + 1]) * s0 ** (2.0 - alpha)
        if k > 0 and np.max(err) <= 1e-13 * scale:
            return total + tail
    raise ConvergenceError(f"exterior s-integrals did not converge (n={n}, t={sweep.t})")


def moment(p, t, disc=None):
    """log E[(Z(2t,0) e^{t/12})^p] from the Fredholm determinant."""
    p, t = float(p), float(t)
    _check_p(p, P_MIN, P_MAX)
    _check_t(t, T_MIN, T_MAX)
    sweep = get_sweep(t, disc)
    n, alpha = split_order(p)
    try:
        val = lower_integral(sweep, n, alpha) + upper_integral(sweep, n, alpha)
    except ConvergenceError as exc:
        raise ConvergenceError(f"moment(p={p}, t={t}): {exc}") from exc
    val *= (-1.0) ** n / math.gamma(1.0 - alpha)
    if not val > 0:
        raise ConvergenceError(f"moment(p={p}, t={t}) came out non-positive: {val!r}")
    return math.log(val)


def tail_term(p, t, disc=None):
    """B_{p,1}(t) = (-1)^n / Gamma(1-alpha) int_1^inf s^{-alpha} D^{(n)}(s) ds."""
    p, t = float(p), float(t)
    _check_p(p, P_MIN, P_MAX)
    _check_t(t, T_MIN, T_MAX)
    n, alpha = split_order(p)
    sweep = get_sweep(t, disc)
    return (-1.0) ** n * upper_integral(sweep, n, alpha) / math.gamma(1.0 - alpha)


def remainder_terms(p, t, disc=None, l_max=6):
    """``[B_{p,1}, B_{p,2}, ..., B_{p,l_max}]``.

    B_{p,1} is the s >= 1 part of the moment integral; B_{p,L} for L >= 2
    integrates the n-th s-derivative of tr(K^{wedge L}) over (0, 1].
    """
    p, t = float(p), float(t)
    if not 1 <= l_max <= 8:
        raise ParameterError(f"l_max must lie in [1, 8], got {l_max}")
    b1 = tail_term(p, t, disc)
    if l_max == 1:
        return [b1]
    n, alpha = split_order(p)
    sweep = get_sweep(t, disc)
    ints = exterior_lower_integrals(sweep, n, alpha, l_max)
    g = math.gamma(1.0 - alpha)
    higher = [(-1.0) ** (n + ell) * ints[ell - 1] / g for ell in range(2, l_max + 1)]
    return [b1] + higher


def decompose(p, t, disc=None, l_max=6):
    """Full :class:`MomentDecomposition` at ``(p, t)``."""
    p, t = float(p), float(t)
    n, alpha = split_order(p)
    rem = remainder_terms(p, t, disc, l_max)
    return MomentDecomposition(
        p=p, t=t, n=n, alpha=alpha,
        leading=leading_term(p, t).value,
        leading_hat=leading_term_hat(p, t),
        tail_term=rem[0],
        higher=list(rem[1:]),
        total=math.exp(moment(p, t, disc)),
    )


def lyapunov_slope(p, t_grid, route="leading", disc_factory=None):
    """Least-squares slope of log E[U^p] (or log A_p) against t.

    ``route="leading"`` uses the closed-form leading term (any t);
    ``route="moment"`` uses the full determinant pipeline (t <= 12).
    """
    ts = np.asarray(t_grid, dtype=float)
    if ts.ndim != 1 or len(ts) < 3 or np.any(np.diff(ts) <= 0):
        raise ParameterError("t_grid must be increasing with at least 3 points")
    if route == "leading":
        logs = np.array([leading_term(p, t).log for t in ts])
    elif route == "moment":
        logs = np.array([moment(p, t, disc_factory(t) if disc_factory else None) for t in ts])
    else:
        raise ParameterError(f"unknown route {route!r}")
    slope, _ = np.polyfit(ts, logs, 1)
    return float(slope)
