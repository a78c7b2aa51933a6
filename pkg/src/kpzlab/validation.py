"""Oracles that do not route through the Laplace-transform determinant.

* first moment: E[Z(t, x)] is the heat kernel;
* second moment: a Volterra equation from the Ito isometry (see below);
* Tracy-Widom limit: det(I - K_Ai) on [sigma, inf) from the closed-form Airy
  kernel on the same Nystrom nodes.

Second moment.  With narrow-wedge data Z(t, x) / p_t(x) has an x-independent
law, so E[Z(t, x)^2] = p_t(x)^2 f(t).  The Ito isometry applied to the mild
form, together with

    int p_{T-s}(y)^2 p_s(y)^2 dy = 1 / (4 pi^{3/2} sqrt(T s (T - s))),

gives f(T) = 1 + (1/2) sqrt(T/pi) int_0^T f(s) / sqrt(s (T - s)) ds and
E[(Z(2t, 0) e^{t/12})^2] = f(2t) e^{t/6} / (4 pi t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ParameterError
from .fredholm import Discretization, fredholm_det, laplace_transform_value
from .kernel import KernelParams
from .quadrature import composite_nodes
from .specfun import airy_arrays


@dataclass(frozen=True)
class OracleComparison:
    name: str
    pipeline_value: float
    oracle_value: float
    rel_error: float
    tolerance: float
    passed: bool
    abs_error: float = math.nan

    @property
    def pass_(self):
        return self.passed


def compare(name, pipeline_value, oracle_value, tolerance, absolute=False):
    """Build an OracleComparison; ``absolute`` tests |difference| instead."""
    diff = abs(pipeline_value - oracle_value)
    rel = diff / abs(oracle_value) if oracle_value != 0 else math.inf
    err = diff if absolute else rel
    return OracleComparison(name, float(pipeline_value), float(oracle_value), float(rel),
                            float(tolerance), bool(err <= tolerance), float(diff))


def first_moment_oracle(t):
    """(4 pi t)^{-1/2} e^{t/12}."""
    t = float(t)
    if not (math.isfinite(t) and t > 0):
        raise ParameterError(f"t must be positive, got {t!r}")
    return math.exp(t / 12.0) / math.sqrt(4.0 * math.pi * t)


# ---------------------------------------------------------------------------
# second moment


def _volterra_endpoint(big_t, n):
    """f(T) by product integration on the mesh s_j = T (j/n)^2.

    f is taken piecewise linear; the weights against 1/sqrt(s(T_i - s)) are
    exact, from the antiderivatives 2 asin sqrt(s/T) and
    -sqrt(s(T - s)) + T asin sqrt(s/T).
    """
    s = big_t * (np.arange(n + 1) / n) ** 2
    f = np.empty(n + 1)
    f[0] = 1.0
    for i in range(1, n + 1):
        ti = s[i]
        nodes = s[:i + 1]
        root = np.sqrt(np.clip(nodes / ti, 0.0, 1.0))
        asn = np.arcsin(root)
        a0 = 2.0 * asn
        a1 = -np.sqrt(np.clip(nodes * (ti - nodes), 0.0, None)) + ti * asn
        d0, d1 = np.diff(a0), np.diff(a1)
        a, b = nodes[:-1], nodes[1:]
        h = b - a
        wa = (b * d0 - d1) / h
        wb = (d1 - a * d0) / h
        c = 0.5 * math.sqrt(ti / math.pi)
        known = np.dot(wa, f[:i]) + np.dot(wb[:-1], f[1:i])
        f[i] = (1.0 + c * known) / (1.0 - c * wb[-1])
    return f[-1]


def second_moment_oracle(t, rel_tol=1e-6, n0=200, n_max=12800):
    """E[(Z(2t, 0) e^{t/12})^2] from the Volterra equation, mesh doubled to self-convergence.

    Successive values are Richardson-extrapolated with the observed order.
    """
    t = float(t)
    if not (math.isfinite(t) and 0 < t <= 6):
        raise ParameterError(f"t must lie in (0, 6], got {t!r}")
    big_t = 2.0 * t
    vals = [_volterra_endpoint(big_t, n0), _volterra_endpoint(big_t, 2 * n0)]
    best = [vals[-1]]
    n = 2 * n0
    while n < n_max:
        n *= 2
        vals.append(_volterra_endpoint(big_t, n))
        v0, v1, v2 = vals[-3:]
        denom = v1 - v2
        order = math.log2(abs((v0 - v1) / denom)) if denom != 0 and v0 != v1 else 2.0
        order = min(max(order, 0.5), 4.0)
        best.append(v2 + (v2 - v1) / (2.0**order - 1.0))
        if abs(best[-1] - best[-2]) <= rel_tol * abs(best[-1]) and abs(v2 - best[-1]) <= 10 * rel_tol * abs(v2):
            return best[-1] * math.exp(t / 6.0) / (4.0 * math.pi * t)
    raise NumericalError(f"second-moment Volterra solve did not self-converge at t={t}")


# ---------------------------------------------------------------------------
# Airy kernel determinant


def _airy_kernel_matrix(z):
    ai, aip = airy_arrays(z)
    dz = z[:, None] - z[None, :]
    num = ai[:, None] * aip[None, :] - aip[:, None] * ai[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        k = num / dz
    diag = aip * aip - z * ai * ai
    k[np.diag_indices_from(k)] = diag
    # nearly coincident off-diagonal nodes: fall back to the diagonal form
    close = np.abs(dz) < 1e-10
    np.fill_diagonal(close, False)
    if np.any(close):
        i, j = np.nonzero(close)
        k[i, j] = 0.5 * (diag[i] + diag[j])
    return k


def airy_kernel_det(sigma, disc: Discretization | None = None, panels=16, order=12):
    """F_2(sigma) = det(I - K_Ai) on [sigma, inf).

    Uses the nodes of ``disc`` (shifted by sigma) when given, otherwise a
    composite Gauss-Legendre rule reaching max(sigma, 12) + 4.
    """
    sigma = float(sigma)
    if not math.isfinite(sigma):
        raise ParameterError(f"sigma must be finite, got {sigma!r}")
    if disc is not None:
        x, w = disc.nodes, disc.weights
    else:
        length = max(12.0, 12.0 - sigma) + 4.0
        x, w = composite_nodes(np.linspace(0.0, length, panels + 1), order)
    z = x + sigma
    k = _airy_kernel_matrix(z)
    sq = np.sqrt(w)
    return fredholm_det(sq[:, None] * k * sq[None, :])


def tw_limit_compare(sigma, t, disc: Discretization, tolerance=1e-2, absolute=False):
    """Laplace transform at s = e^{-t^{1/3} sigma} against F_2(sigma)."""
    t = float(t)
    if t < 100:
        raise ParameterError(f"the Tracy-Widom comparison needs t >= 100, got {t}")
    s = math.exp(-t ** (1.0 / 3.0) * float(sigma))
    value = laplace_transform_value(KernelParams(s, t), disc)
    oracle = airy_kernel_det(sigma)
    return compare(f"tw_limit(sigma={sigma:g}, t={t:g})", value, oracle, tolerance, absolute)


def moment_compare(p, t, pipeline_log, tolerance=1e-3):
    """Pipeline moment against the first/second moment oracle (p = 1 or 2)."""
    if p == 1:
        oracle = first_moment_oracle(t)
    elif p == 2:
        oracle = second_moment_oracle(t)
    else:
        raise ParameterError(f"no moment oracle for p={p}")
    return compare(f"moment(p={p:g}, t={t:g})", math.exp(pipeline_log), oracle, tolerance)

