"""Airy function, the tail integrals of Ai^2, and log-gamma.

Two independent evaluation routes are provided for the Airy pair:

* ``airy_pair`` / ``airy_arrays`` -- the production path (AMOS via scipy),
  vectorised and used by every kernel and trace computation;
* ``airy_reference`` -- Maclaurin series summed in extended precision for
  ``|x| <= SERIES_CUTOFF`` and Poincare asymptotic expansions beyond.  It is
  slow and scalar, and exists to certify the production path.

The tail integral ``aisq(y) = int_y^inf Ai(x)^2 dx`` and its integral
``aisq_tail_integral`` lose digits to cancellation for large positive ``y``;
there both are evaluated from the asymptotic series with the leading
cancellation removed symbolically, and ``log_aisq`` / ``log_aisq_tail``
return their logarithms without underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import mpmath
import numpy as np
from scipy import special

from .errors import DomainError

# Beyond this |x| the asymptotic expansions are accurate to ~e^{-2 zeta} < 5e-15.
SERIES_CUTOFF = 8.5
# Above this argument aisq and its integral switch to the asymptotic series.
ASYMPTOTIC_START = 8.5
_MAX_ABS_ARG = 1.0e4
_N_ASYMP = 40


@dataclass(frozen=True)
class AiryValue:
    x: float
    ai: float
    ai_prime: float


def _check_finite(x, name="x"):
    if not math.isfinite(x):
        raise DomainError(f"{name} must be finite, got {x!r}")


def airy_arrays(x):
    """Vectorised ``(Ai(x), Ai'(x))``; large positive arguments underflow to 0."""
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        ai, aip, _, _ = special.airy(x)
    # AMOS returns nan for Bi overflow only; Ai is clean but guard anyway.
    ai = np.where(np.isnan(ai) & (x > 0), 0.0, ai)
    aip = np.where(np.isnan(aip) & (x > 0), 0.0, aip)
    return ai, aip


def airy_pair(x: float) -> AiryValue:
    """Return Ai(x) and Ai'(x) for a finite real ``x`` with ``|x| <= 1e4``."""
    x = float(x)
    _check_finite(x)
    if abs(x) > _MAX_ABS_ARG:
        raise DomainError(f"|x| must be <= {_MAX_ABS_ARG:g}, got {x!r}")
    ai, aip = airy_arrays(x)
    return AiryValue(x, float(ai), float(aip))


# ---------------------------------------------------------------------------
# reference scheme


@lru_cache(maxsize=None)
def _asymptotic_coefficients(n=_N_ASYMP):
    """Exact coefficients u_k, v_k of the Airy asymptotic expansions."""
    u = [Fraction(1)]
    for k in range(1, n):
        u.append(u[-1] * Fraction((6 * k - 5) * (6 * k - 3) * (6 * k - 1), (2 * k - 1) * 216 * k))
    v = [Fraction(1)] + [-Fraction(6 * k + 1, 6 * k - 1) * u[k] for k in range(1, n)]
    return tuple(u), tuple(v)


def _truncated_sum(coefs, w):
    """Sum ``coefs[k] * w**k`` stopping before the terms start to grow."""
    total = 0.0
    prev = math.inf
    term_pow = 1.0
    for c in coefs:
        term = float(c) * term_pow
        if abs(term) > prev:
            break
        total += term
        prev = abs(term)
        term_pow *= w
    return total


def airy_asymptotic(x: float) -> AiryValue:
    """Poincare expansions of Ai and Ai' for ``|x|`` large (both signs)."""
    x = float(x)
    _check_finite(x)
    u, v = _asymptotic_coefficients()
    if x > 0:
        zeta = 2.0 / 3.0 * x**1.5
        alt_u = [(-1) ** k * c for k, c in enumerate(u)]
        alt_v = [(-1) ** k * c for k, c in enumerate(v)]
        su = _truncated_sum(alt_u, 1.0 / zeta)
        sv = _truncated_sum(alt_v, 1.0 / zeta)
        pref = math.exp(-zeta) / (2.0 * math.sqrt(math.pi))
        return AiryValue(x, pref * x**-0.25 * su, -pref * x**0.25 * sv)
    z = -x
    zeta = 2.0 / 3.0 * z**1.5
    w2 = 1.0 / zeta**2
    ue = [(-1) ** k * u[2 * k] for k in range(len(u) // 2)]
    uo = [(-1) ** k * u[2 * k + 1] for k in range(len(u) // 2)]
    ve = [(-1) ** k * v[2 * k] for k in range(len(v) // 2)]
    vo = [(-1) ** k * v[2 * k + 1] for k in range(len(v) // 2)]
    theta = zeta - math.pi / 4.0
    c, s = math.cos(theta), math.sin(theta)
    ai = (c * _truncated_sum(ue, w2) + s * _truncated_sum(uo, w2) / zeta) / (math.sqrt(math.pi) * z**0.25)
    aip = z**0.25 / math.sqrt(math.pi) * (s * _truncated_sum(ve, w2) - c * _truncated_sum(vo, w2) / zeta)
    return AiryValue(x, ai, aip)


def airy_series(x: float, dps: int = 50) -> AiryValue:
    """Maclaurin series of Ai and Ai' summed to convergence at ``dps`` digits."""
    x = float(x)
    _check_finite(x)
    with mpmath.workdps(dps):
        xm = mpmath.mpf(x)
        c1 = mpmath.power(3, mpmath.mpf(-2) / 3) / mpmath.gamma(mpmath.mpf(2) / 3)
        c2 = mpmath.power(3, mpmath.mpf(-1) / 3) / mpmath.gamma(mpmath.mpf(1) / 3)
        # a_{n+3} = a_n / ((n+2)(n+3)), from Ai'' = x Ai
        a = [c1, -c2, mpmath.mpf(0)]
        ai = c1 - c2 * xm
        aip = -c2
        eps = mpmath.mpf(10) ** (-dps + 5)
        xprev = xm  # x**(n-1)
        quiet = 0
        n = 2
        while quiet < 3:
            if n >= 3:
                a.append(a[n - 3] / ((n - 1) * n))
            dterm = n * a[n] * xprev
            term = dterm * xm / n
            ai += term
            aip += dterm
            small = abs(term) <= eps * abs(ai) and abs(dterm) <= eps * abs(aip)
            quiet = quiet + 1 if small and n > 6 else 0
            xprev *= xm
            n += 1
        return AiryValue(x, float(ai), float(aip))


def airy_reference(x: float) -> AiryValue:
    """Independent Airy evaluation: series inside the cutoff, asymptotics outside."""
    if abs(x) <= SERIES_CUTOFF:
        return airy_series(x)
    return airy_asymptotic(x)


# ---------------------------------------------------------------------------
# integrals of Ai^2


@lru_cache(maxsize=None)
def _tail_series():
    """Coefficient arrays (in powers of 1/zeta) for the scaled tail integrals.

    With S_u = sum (-1)^k u_k w^k and S_v likewise,
        e^{2 zeta} aisq(y) = sqrt(y)/(4 pi) * (S_v^2 - S_u^2)
        e^{2 zeta} g(y)    = 1/(12 pi) * (3 zeta (S_u^2 - S_v^2) + S_u S_v)
    Both leading orders cancel exactly; the polynomials are built in exact
    rational arithmetic so the cancellation costs no precision.
    """
    u, v = _asymptotic_coefficients()
    n = len(u)
    su = [(-1) ** k * u[k] for k in range(n)]
    sv = [(-1) ** k * v[k] for k in range(n)]

    def mul(a, b):
        out = [Fraction(0)] * n
        for i in range(n):
            for j in range(n - i):
                out[i + j] += a[i] * b[j]
        return out

    uu, vv, uv = mul(su, su), mul(sv, sv), mul(su, sv)
    diff = [vv[k] - uu[k] for k in range(n)]  # diff[0] == 0
    aisq_poly = diff
    # 3 zeta (S_u^2 - S_v^2): multiply by zeta -> shift down one power
    g_poly = [3 * (-diff[k + 1]) + uv[k] for k in range(n - 1)]
    return tuple(aisq_poly), tuple(g_poly)


# zeta > 16.5 past the cutoff, so the first 30 terms are still decreasing.
_N_TAIL_TERMS = 30


def _poly_in_inverse(coefs, zeta):
    c = np.array([float(v) for v in coefs[1:_N_TAIL_TERMS + 1]])[::-1]
    return np.polyval(c, 1.0 / zeta) / zeta


def _log_aisq_asymptotic(y):
    zeta = 2.0 / 3.0 * y**1.5
    aisq_poly, _ = _tail_series()
    q = _poly_in_inverse(aisq_poly, zeta)
    return -2.0 * zeta + np.log(np.sqrt(y) / (4.0 * np.pi) * q)


def _log_g_asymptotic(y):
    zeta = 2.0 / 3.0 * y**1.5
    _, g_poly = _tail_series()
    q = _poly_in_inverse(g_poly, zeta)
    return -2.0 * zeta + np.log(q / (12.0 * np.pi))


def _aisq_direct(y):
    ai, aip = airy_arrays(y)
    return aip * aip - y * ai * ai


def _g_direct(y):
    ai, aip = airy_arrays(y)
    return (2.0 * y * y * ai * ai - 2.0 * y * aip * aip - ai * aip) / 3.0


def _vectorize_logged(y, direct, asymptotic, log):
    y_arr = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y_arr)):
        raise DomainError("argument must be finite")
    flat = y_arr.ravel()
    out = np.empty_like(flat)
    big = flat > ASYMPTOTIC_START
    small = ~big
    if np.any(small):
        vals = direct(flat[small])
        out[small] = np.log(vals) if log else vals
    if np.any(big):
        logs = asymptotic(flat[big])
        out[big] = logs if log else np.exp(logs)
    out = out.reshape(y_arr.shape)
    return float(out) if out.ndim == 0 else out


def aisq(y):
    """``int_y^inf Ai(x)^2 dx = Ai'(y)^2 - y Ai(y)^2``; accepts scalars or arrays."""
    return _vectorize_logged(y, _aisq_direct, _log_aisq_asymptotic, log=False)


def log_aisq(y):
    """Natural log of :func:`aisq`, finite far beyond the underflow threshold."""
    return _vectorize_logged(y, _aisq_direct, _log_aisq_asymptotic, log=True)


def aisq_tail_integral(y):
    """``g(y) = int_y^inf aisq(r) dr`` in closed form."""
    return _vectorize_logged(y, _g_direct, _log_g_asymptotic, log=False)


def log_aisq_tail(y):
    return _vectorize_logged(y, _g_direct, _log_g_asymptotic, log=True)


def log_gamma(x: float) -> float:
    """log Gamma(x) for x > 0."""
    x = float(x)
    _check_finite(x)
    if x <= 0:
        raise DomainError(f"log_gamma requires x > 0, got {x!r}")
    return math.lgamma(x)
