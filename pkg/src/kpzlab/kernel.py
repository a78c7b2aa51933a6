"""The Fermi-type weight and the kernels K_{s,t} and their s-derivatives.

The kernel of order ``n`` is

    K^{(n)}(x, y) = int Ai(x + r) Ai(y + r) w_n(r) dr,
    w_n(r) = d^n/ds^n [1 / (1 + e^{-t^{1/3} r} / s)].

Every weight is handled as a (sign, log-magnitude) pair, so that ``s`` may
range over hundreds of orders of magnitude and ``t^{1/3} r`` over +-10^3
without overflow.  The r-integrals use a panel grid anchored at ``r = 0``
whose widths follow the local Airy wavelength; the same grid is shared by
the pointwise evaluator here and the matrix assembly in :mod:`fredholm`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConvergenceError, DomainError, ParameterError
from .quadrature import gauss_legendre_rule, integrate
from .specfun import airy_arrays

MAX_ORDER = 12
# Contributions below e^{-CUT_LOG} of the largest one are dropped (~1.6e-18).
CUT_LOG = 41.0
R_PANEL_ORDER = 16


@dataclass(frozen=True)
class KernelParams:
    s: float
    t: float
    order: int = 0

    def __post_init__(self):
        s, t = float(self.s), float(self.t)
        if not (math.isfinite(s) and s > 0):
            raise ParameterError(f"s must be positive and finite, got {self.s!r}")
        if not (math.isfinite(t) and t > 0):
            raise ParameterError(f"t must be positive and finite, got {self.t!r}")
        if isinstance(self.order, bool) or int(self.order) != self.order:
            raise ParameterError(f"order must be an integer, got {self.order!r}")
        if not 0 <= int(self.order) <= MAX_ORDER:
            raise ParameterError(f"order must lie in [0, {MAX_ORDER}], got {self.order}")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "order", int(self.order))

    @property
    def log_s(self):
        return math.log(self.s)

    @property
    def t13(self):
        return self.t ** (1.0 / 3.0)

    def with_order(self, order):
        return KernelParams(self.s, self.t, order)

    def with_s(self, s):
        return KernelParams(s, self.t, self.order)


def log_weight(order, log_s, u):
    """Sign and log-magnitude of d^n/ds^n of 1/(1 + e^{-u}/s).

    ``log_s`` may be ``-inf`` (the s -> 0 limit) for ``order >= 1``.
    """
    u = np.asarray(u, dtype=float)
    if order == 0:
        # log v = -softplus(-(u + log s))
        return 1.0, -np.logaddexp(0.0, -(u + log_s))
    logmag = math.lgamma(order + 1) - u - (order + 1) * np.logaddexp(log_s, -u)
    return (-1.0) ** (order - 1), logmag


def fermi_weight(params: KernelParams, r):
    """``v(s,t,r) = 1/(1 + e^{-rt}/s)`` or its ``order``-th s-derivative."""
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)):
        raise DomainError("r must be finite")
    sign, logmag = log_weight(params.order, params.log_s, r * params.t)
    out = sign * np.exp(logmag)
    return float(out) if out.ndim == 0 else out


def kernel_weight(params: KernelParams, r):
    """Weight of the kernel integral, argument ``t^{1/3} r``."""
    r = np.asarray(r, dtype=float)
    sign, logmag = log_weight(params.order, params.log_s, r * params.t13)
    out = sign * np.exp(logmag)
    return float(out) if out.ndim == 0 else out


def log_airy_envelope(z):
    """An upper bound for log Ai(z')^2 valid for every z' >= z."""
    z = np.asarray(z, dtype=float)
    zz = np.maximum(z, 1.0)
    tail = -4.0 / 3.0 * zz**1.5 - np.log(4.0 * math.pi * np.sqrt(zz))
    return np.where(z <= 1.0, math.log(0.29), tail)


def weight_support(params: KernelParams, z0=0.0):
    """Interval of r outside which |w(r)| Ai(z + r)^2, z >= z0, is negligible.

    Returns ``(r_lo, r_hi, log_peak)``.
    """
    t13 = params.t13
    rstar = -params.log_s / t13
    n_eff = max(params.order, 1)
    lo = min(rstar, 0.0) - z0 - (100.0 + 5.0 * n_eff) / t13 - 5.0
    hi = max(rstar, 0.0) - z0 + n_eff**2 * t13**2 / 4.0 + 20.0
    r = np.linspace(lo, hi, 8001)
    _, lw = log_weight(params.order, params.log_s, r * t13)
    g = lw + log_airy_envelope(z0 + r)
    peak = float(np.max(g))
    keep = np.nonzero(g >= peak - CUT_LOG)[0]
    step = r[1] - r[0]
    r_lo = r[keep[0]] - step
    r_hi = r[keep[-1]] + step
    if keep[0] == 0 or keep[-1] == len(r) - 1:
        raise ConvergenceError(f"weight support scan did not bracket the integrand for {params}")
    return float(r_lo), float(r_hi), peak


class RPanelGrid:
    """Panel breakpoints on the r-axis for a fixed t, anchored at r = 0.

    Width of the panel starting at r is ``min(h_max, 2 pi / sqrt(|r|))`` on
    the oscillatory side and ``h_max = min(1, 2 / t^{1/3})`` elsewhere; the
    latter resolves the logistic transition of the weight.
    """

    def __init__(self, t):
        self.t = float(t)
        self.h_max = min(1.0, 2.0 / self.t ** (1.0 / 3.0))
        self._neg = [0.0]
        self._pos = [0.0]

    def _width(self, r):
        if r >= 0:
            return self.h_max
        return min(self.h_max, 2.0 * math.pi / math.sqrt(-r))

    def _extend(self, r_lo, r_hi):
        while self._pos[-1] < r_hi:
            self._pos.append(self._pos[-1] + self.h_max)
        while self._neg[-1] > r_lo:
            edge = self._neg[-1]
            # width chosen from the far end of the panel (the faster oscillation)
            h = self._width(edge - self._width(edge))
            self._neg.append(edge - h)

    def panel_range(self, r_lo, r_hi):
        """Signed panel indices of every panel meeting ``[r_lo, r_hi]``.

        Panel ``k >= 0`` is ``[pos[k], pos[k+1]]``; panel ``-m`` is
        ``[neg[m], neg[m-1]]``.
        """
        self._extend(r_lo, r_hi)
        neg = [-m for m in range(len(self._neg) - 1, 0, -1)
               if self._neg[m - 1] > r_lo and self._neg[m] < r_hi]
        pos = [k for k in range(len(self._pos) - 1)
               if self._pos[k + 1] > r_lo and self._pos[k] < r_hi]
        return neg + pos

    def panel(self, k):
        if k >= 0:
            return self._pos[k], self._pos[k + 1]
        return self._neg[-k], self._neg[-k - 1]

    def nodes(self, k):
        a, b = self.panel(k)
        rule = gauss_legendre_rule(R_PANEL_ORDER)
        half = 0.5 * (b - a)
        return a + half * (rule.nodes + 1.0), half * rule.weights


@lru_cache(maxsize=64)
def r_panel_grid(t):
    return RPanelGrid(t)


def r_quadrature(params: KernelParams, z0=0.0):
    """Nodes, weights and panel indices of the r-integral for ``params``."""
    r_lo, r_hi, _ = weight_support(params, z0)
    grid = r_panel_grid(params.t)
    ks = list(grid.panel_range(r_lo, r_hi))
    pieces = [grid.nodes(k) for k in ks]
    r = np.concatenate([p[0] for p in pieces])
    w = np.concatenate([p[1] for p in pieces])
    return r, w, ks


def kernel_eval(params: KernelParams, x, y, form="K"):
    """Pointwise kernel value K^{(n)}_{s,t}(x, y) for x, y >= 0.

    ``form="K"`` integrates in the weight variable t^{1/3} r; ``form="K."``
    uses the rescaled variable r' = t^{-2/3} r, where the weight reads
    v(s, t, r') with argument r' t and the Jacobian is t^{2/3}.
    """
    x, y = float(x), float(y)
    if not (x >= 0 and y >= 0 and math.isfinite(x) and math.isfinite(y)):
        raise DomainError(f"x, y must be finite and nonnegative, got ({x!r}, {y!r})")
    x, y = min(x, y), max(x, y)  # evaluate once in a canonical order
    r, w, _ = r_quadrature(params, z0=x)
    if form == "K":
        sign, lw = log_weight(params.order, params.log_s, r * params.t13)
        ax, _ = airy_arrays(x + r)
        ay, _ = airy_arrays(y + r)
        return float(sign * np.sum(w * np.exp(lw) * ax * ay))
    if form == "K.":
        # independent uniform panels in the rescaled variable
        scale = params.t ** (2.0 / 3.0)
        r_lo, r_hi = r[0] / scale, r[-1] / scale
        h = min(0.5, 1.0 / params.t13, math.pi / math.sqrt(max(1.0, -r[0]))) / scale
        panels = max(1, math.ceil((r_hi - r_lo) / h))

        def integrand(rp):
            sign, lw = log_weight(params.order, params.log_s, rp * params.t)
            ax, _ = airy_arrays(x + scale * rp)
            ay, _ = airy_arrays(y + scale * rp)
            return sign * np.exp(lw) * ax * ay

        return scale * integrate(integrand, r_lo, r_hi, panels, 20)
    raise ParameterError(f"unknown kernel form {form!r}")
