"""Upper-tail rate functions: Chernoff optimisation, the variational
consistency problem and its nonuniqueness, and moment-based tail estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .asymptotics import crossover_rate, phi_plus
from .errors import DomainError, EvaluationError, ParameterError


@dataclass(frozen=True)
class RateReport:
    y: float
    phi: float
    chernoff: float
    crossover: float
    tail_log_estimate: float | None = None


def _check_y(y):
    y = float(y)
    if not (math.isfinite(y) and y > 0):
        raise DomainError(f"y must be positive and finite, got {y!r}")
    return y


def chernoff_rate(y, return_argmin=False):
    """inf over p in (0, 4 sqrt(y)] of -p y + p^3 / 12."""
    y = _check_y(y)
    p_max = 4.0 * math.sqrt(y)
    res = optimize.minimize_scalar(lambda p: -p * y + p**3 / 12.0, bounds=(0.0, p_max),
                                   method="bounded", options={"xatol": 1e-12 * max(1.0, p_max)})
    val = float(res.fun)
    return (val, float(res.x)) if return_argmin else val


def rate_report(y, t=None, moment_source=None):
    y = _check_y(y)
    tail = None
    if t is not None and moment_source is not None:
        tail = tail_estimate(y, t, moment_source)
    return RateReport(y, phi_plus(y), chernoff_rate(y), crossover_rate(y), tail)


# ---------------------------------------------------------------------------
# variational problem


def _objective(phi, y):
    def f(xi):
        v = float(phi(xi))
        if not math.isfinite(v):
            raise EvaluationError(f"phi is not finite at xi = {xi!r}", node=float(xi))
        return min(xi - y, 0.0) - v
    return f


def variational_value(phi, y, points=10_000):
    """sup over xi > 0 of min{xi - y, 0} - phi(xi).

    Dense grid on [1e-4, y + 10] followed by a bounded scalar search in the
    two cells around the best grid point; the objective has a kink at
    xi = y, so nothing derivative-based is used.
    """
    y = _check_y(y)
    grid = np.linspace(1e-4, y + 10.0, points)
    with np.errstate(all="ignore"):
        try:
            vals = np.asarray(phi(grid), dtype=float)
            if vals.shape != grid.shape:
                raise ValueError
        except (TypeError, ValueError):
            vals = np.array([float(phi(x)) for x in grid])
    if not np.all(np.isfinite(vals)):
        bad = float(grid[np.argmax(~np.isfinite(vals))])
        raise EvaluationError(f"phi is not finite at xi = {bad!r}", node=bad)
    obj = np.minimum(grid - y, 0.0) - vals
    i = int(np.argmax(obj))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, points - 1)]
    f = _objective(phi, y)
    best = float(obj[i])
    # the kink is a candidate of its own
    candidates = [best]
    if lo <= y <= hi:
        candidates.append(f(y))
    res = optimize.minimize_scalar(lambda x: -f(x), bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-13})
    candidates.append(-float(res.fun))
    return max(candidates)


def variational_rhs(y):
    """Piecewise value of the variational problem for phi = Phi_+."""
    return crossover_rate(y)


def blended_phi(blend):
    """Phi_+ on (0, 1/4]; beyond, a blend of Phi_+ and the lower corridor edge xi - 1/12."""
    blend = float(blend)
    if not 0.0 <= blend <= 1.0:
        raise ParameterError(f"blend must lie in [0, 1], got {blend!r}")

    def phi(xi):
        xi = np.asarray(xi, dtype=float)
        upper = 4.0 / 3.0 * np.abs(xi) ** 1.5
        lower = xi - 1.0 / 12.0
        mixed = np.clip(blend * upper + (1.0 - blend) * lower, lower, upper)
        out = np.where(xi <= 0.25, upper, mixed)
        return float(out) if out.ndim == 0 else out

    return phi


def nonuniqueness_demo(y_grid, blend):
    """Variational values for Phi_+ and a corridor perturbation.

    Returns a list of dicts with keys ``y, phi_plus_value, blend_value, difference``.
    """
    ys = [_check_y(y) for y in np.atleast_1d(y_grid)]
    if not ys:
        raise ParameterError("y_grid must be nonempty")
    base = blended_phi(1.0)
    other = blended_phi(blend)
    rows = []
    for y in ys:
        a = variational_value(base, y)
        b = a if blend == 1.0 else variational_value(other, y)
        rows.append({"y": y, "phi_plus_value": a, "blend_value": b, "difference": b - a})
    return rows


# ---------------------------------------------------------------------------
# tail estimates


def default_p_grid():
    return np.linspace(0.1, 4.0, 391)


def tail_estimate(y, t, moment_source, p_grid=None):
    """(1/t) log min_p exp(-p t y + log E[U^p]): the Markov/Chernoff bound on
    P[H(2t, 0) + t/12 >= t y] from a log-moment function of p.

    The p -> 0 limit (a probability is at most 1) caps the result at 0.
    """
    y = _check_y(y)
    t = float(t)
    if not (math.isfinite(t) and t > 0):
        raise ParameterError(f"t must be positive, got {t!r}")
    ps = default_p_grid() if p_grid is None else np.asarray(p_grid, dtype=float)
    logs = np.array([float(moment_source(p)) for p in ps])
    vals = -ps * t * y + logs
    return min(float(np.min(vals)), 0.0) / t
