"""Gauss-Legendre rules and composite integrators.

Rules are built by Newton iteration on the three-term Legendre recurrence and
cached per order.  The composite integrators evaluate ``f`` on whole arrays of
nodes at once; integrands must therefore accept numpy arrays (pass
``vectorized=False`` for scalar-only callables).
"""

from __future__ import annotations

import math
import os
import tempfile
import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .errors import ConvergenceError, EvaluationError, ParameterError

MAX_ORDER = 2000


@dataclass(frozen=True)
class QuadratureRule:
    order: int
    nodes: np.ndarray
    weights: np.ndarray

    def scaled(self, a, b):
        """Nodes and weights mapped affinely onto ``[a, b]``."""
        half = 0.5 * (b - a)
        return a + half * (self.nodes + 1.0), half * self.weights


def _legendre_and_derivative(n, x):
    p0 = np.ones_like(x)
    p1 = x.copy()
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    return p1, dp


def _compute_rule(n):
    if n == 1:
        return np.array([0.0]), np.array([2.0])
    m = n // 2
    i = np.arange(1, m + 1)
    # Tricomi-corrected Chebyshev angles; roots in decreasing order
    theta = math.pi * (i - 0.25) / (n + 0.5)
    x = np.cos(theta) * (1.0 - (n - 1.0) / (8.0 * n**3))
    for _ in range(100):
        p, dp = _legendre_and_derivative(n, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-16:
            break
    p, dp = _legendre_and_derivative(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    pos_x, pos_w = x[::-1], w[::-1]
    if n % 2:
        _, dp0 = _legendre_and_derivative(n, np.array([0.0]))
        mid_x, mid_w = np.array([0.0]), 2.0 / dp0**2
    else:
        mid_x, mid_w = np.empty(0), np.empty(0)
    nodes = np.concatenate([-pos_x[::-1], mid_x, pos_x])
    weights = np.concatenate([pos_w[::-1], mid_w, pos_w])
    return nodes, weights


_disk_lock = threading.Lock()


def _disk_path(order):
    root = os.environ.get("KPZLAB_CACHE_DIR")
    if not root:
        return None
    return os.path.join(root, f"gauss_legendre_{order}.npy")


def _load_or_compute(order):
    path = _disk_path(order)
    if path is not None and os.path.exists(path):
        try:
            data = np.load(path)
            if data.shape == (2, order):
                return data[0], data[1]
        except (OSError, ValueError):
            pass
    nodes, weights = _compute_rule(order)
    if path is not None:
        with _disk_lock:
            try:
                os.makedirs(os.path.dirname(path), exist_ok=True)
                fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), suffix=".npy")
                with os.fdopen(fd, "wb") as fh:
                    np.save(fh, np.vstack([nodes, weights]))
                os.replace(tmp, path)
            except OSError:
                pass
    return nodes, weights


@lru_cache(maxsize=None)
def gauss_legendre_rule(order: int) -> QuadratureRule:
    """Gauss-Legendre rule with ``order`` nodes on ``[-1, 1]``."""
    if isinstance(order, bool) or int(order) != order:
        raise ParameterError(f"order must be an integer, got {order!r}")
    order = int(order)
    if not 1 <= order <= MAX_ORDER:
        raise ParameterError(f"order must lie in [1, {MAX_ORDER}], got {order}")
    nodes, weights = _load_or_compute(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(order, nodes, weights)


def composite_nodes(breakpoints, order):
    """Nodes and weights of a composite rule over consecutive breakpoints."""
    bp = np.asarray(breakpoints, dtype=float)
    rule = gauss_legendre_rule(order)
    half = 0.5 * np.diff(bp)
    x = bp[:-1, None] + half[:, None] * (rule.nodes[None, :] + 1.0)
    w = half[:, None] * rule.weights[None, :]
    return x.ravel(), w.ravel()


def _evaluate(f, x, vectorized):
    if vectorized:
        y = np.asarray(f(x), dtype=float)
        if y.shape != x.shape:
            y = np.broadcast_to(y, x.shape)
    else:
        y = np.array([float(f(v)) for v in x])
    bad = ~np.isfinite(y)
    if np.any(bad):
        node = float(x[np.argmax(bad)])
        raise EvaluationError(f"integrand is not finite at x = {node!r}", node=node)
    return y


def _check_interval(a, b, panels, order):
    if not (math.isfinite(a) and math.isfinite(b)) or not a < b:
        raise ParameterError(f"need finite a < b, got [{a!r}, {b!r}]")
    if int(panels) != panels or panels < 1:
        raise ParameterError(f"panels must be a positive integer, got {panels!r}")
    gauss_legendre_rule(order)


def integrate(f, a, b, panels=1, order=20, vectorized=True):
    """Composite Gauss-Legendre integral of ``f`` over ``[a, b]``."""
    a, b = float(a), float(b)
    _check_interval(a, b, panels, order)
    x, w = composite_nodes(np.linspace(a, b, int(panels) + 1), order)
    return float(np.dot(w, _evaluate(f, x, vectorized)))


def integrate_with_error(f, a, b, panels=1, order=20, vectorized=True):
    """Return ``(value, error)`` where the value uses ``2*panels`` panels and
    the error is its distance to the ``panels`` result."""
    coarse = integrate(f, a, b, panels, order, vectorized)
    fine = integrate(f, a, b, 2 * panels, order, vectorized)
    return fine, abs(fine - coarse)


def integrate_decaying(f, a, decay_rate, tol, panel_width=None, order=20,
                       vectorized=True, max_panels=20000):
    """Integrate ``f`` over ``[a, inf)`` for an eventually exponentially decaying ``f``.

    Panels of width ``panel_width`` (default ``1/decay_rate``) are added until
    both the last panel's contribution and the tail bound ``|f(b)|/decay_rate``
    fall below ``tol``.  A function that never decays raises ConvergenceError.
    """
    a = float(a)
    if not math.isfinite(a):
        raise ParameterError(f"a must be finite, got {a!r}")
    if not decay_rate > 0 or not tol > 0:
        raise ParameterError("decay_rate and tol must be positive")
    h = float(panel_width) if panel_width else 1.0 / decay_rate
    chunk = 32
    total = 0.0
    done = 0
    while done < max_panels:
        bp = a + h * np.arange(done, done + chunk + 1)
        x, w = composite_nodes(bp, order)
        contrib = (w * _evaluate(f, x, vectorized)).reshape(chunk, order).sum(axis=1)
        ends = np.abs(_evaluate(f, bp[1:], vectorized)) / decay_rate
        for k in range(chunk):
            total += contrib[k]
            if abs(contrib[k]) < tol and ends[k] < tol:
                return float(total)
        done += chunk
    raise ConvergenceError(
        f"integrand has not decayed below tol={tol:g} after {max_panels} panels from a={a:g}")


def log_integrate_positive(logf, center, width, rel_tol=1e-17, order=16,
                           lower=-math.inf, upper=math.inf, max_panels=100000):
    """Logarithm of the integral of ``exp(logf(r))`` over ``[lower, upper]``.

    Panels of fixed ``width`` are marched outward from ``center`` until the
    integrand drops ``log(1/rel_tol)`` below the running maximum on both
    sides.  ``width`` may be a callable giving a local width at a point.
    Nothing is ever exponentiated unshifted, so arbitrarily large or small
    integrals are representable.
    """
    center = min(max(float(center), lower), upper)
    cut = math.log(rel_tol)
    logs = []
    peak = -math.inf
    chunk = 16

    def step_width(r):
        return float(width(r)) if callable(width) else float(width)

    for direction in (1.0, -1.0):
        edge = center
        bound = upper if direction > 0 else lower
        panels = 0
        while edge != bound:
            bp = [edge]
            for _ in range(chunk):
                nxt = bp[-1] + direction * step_width(bp[-1])
                nxt = min(nxt, bound) if direction > 0 else max(nxt, bound)
                bp.append(nxt)
                if nxt == bound:
                    break
            bp = np.array(bp if direction > 0 else bp[::-1])
            x, w = composite_nodes(bp, order)
            lv = np.asarray(logf(x), dtype=float)
            if np.any(np.isnan(lv)) or np.any(lv == math.inf):
                node = float(x[np.argmax(~np.isfinite(lv))])
                raise EvaluationError(f"log-integrand is not finite at r = {node!r}", node=node)
            logs.append(lv + np.log(w))
            peak = max(peak, float(np.max(lv)))
            edge = float(bp[-1] if direction > 0 else bp[0])
            outer = lv[-order:] if direction > 0 else lv[:order]
            if np.max(outer) < peak + cut and panels > 0:
                break
            panels += len(bp) - 1
            if panels > max_panels:
                raise ConvergenceError("log-space integrand does not decay")
    return float(logsumexp(np.concatenate(logs)))
