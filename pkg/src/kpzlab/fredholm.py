"""Nystrom discretisation of K_{s,t} on L^2([0, inf)).

The symmetrised matrix is ``M = sqrt(W) K sqrt(W)`` with ``W`` the x-quadrature
weights.  Writing the r-integral of the kernel as a quadrature sum gives

    M = sign * F F^T,   F[i, k] = sqrt(w_i) Ai(x_i + r_k) sqrt(omega_k |w(r_k)|),

so every order-n matrix is assembled as a (signed) Gram matrix: symmetric and
semidefinite by construction.  The Airy blocks ``Ai(x_i + r_k)`` are the
expensive part and are cached per discretisation and r-panel.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize, special
from scipy.special import logsumexp

from .errors import NumericalError, ParameterError
from .kernel import (KernelParams, log_weight, r_panel_grid, weight_support)
from .quadrature import composite_nodes, gauss_legendre_rule, log_integrate_positive
from .specfun import airy_arrays, log_aisq

MIN_NODES, MAX_NODES = 20, 2000
X_PANEL_ORDER = 10
# log of the relative size below which kernel tails are dropped (e^-37 ~ 8.5e-17)
TAIL_LOG = 37.0


@dataclass(eq=False)
class Discretization:
    """Composite Gauss-Legendre rule on ``[0, x_max]``."""

    x_max: float
    nodes: np.ndarray
    weights: np.ndarray
    node_count: int
    t: float = math.nan
    shift_hint: float = 0.0
    _airy_cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def sqrt_weights(self):
        return np.sqrt(self.weights)

    def airy_block(self, t, k):
        """``sqrt(w_i) Ai(x_i + r)`` for the nodes r of r-panel ``k``."""
        key = (float(t), k)
        block = self._airy_cache.get(key)
        if block is None:
            r, _ = r_panel_grid(float(t)).nodes(k)
            ai, _ = airy_arrays(self.nodes[:, None] + r[None, :])
            block = self.sqrt_weights[:, None] * ai
            with self._lock:
                self._airy_cache[key] = block
        return block


@dataclass(frozen=True)
class SpectralData:
    eigenvalues: np.ndarray
    matrix_trace: float
    params: KernelParams

    @property
    def largest_eigenvalue(self):
        return float(self.eigenvalues[0])


def _x_root(shift):
    # aisq(x + shift) = 1e-28
    target = math.log(1e-28)
    root = optimize.brentq(lambda x: log_aisq(x) - target, 0.0, 60.0, xtol=1e-12)
    return root - shift


def discretization_extent(t, shift_hint=0.0):
    """Truncation point x_max for the given time and weight shift.

    Beyond x_max both the Airy factor, aisq(x_max + shift) < 1e-28, and the
    exponential tail ``s e^{t/12} e^{-t^{1/3} x}`` of the kernel diagonal are
    negligible.
    """
    t13 = t ** (1.0 / 3.0)
    x_airy = _x_root(shift_hint)
    x_tail = max(0.0, t13**2 / 12.0 - shift_hint) + TAIL_LOG / t13
    return max(x_airy, x_tail, 4.0)


def build_discretization(t, shift_hint=0.0, node_count=300, x_max=None):
    """Composite Gauss-Legendre nodes on ``[0, x_max]``.

    Panels carry 10 nodes each (a few carry one more or fewer so the total is
    exactly ``node_count``).  The panel density is doubled on ``[0, 4]`` and
    grows like ``sqrt(-(x + shift_hint))`` where the kernel oscillates.
    """
    if isinstance(node_count, bool) or int(node_count) != node_count:
        raise ParameterError(f"node_count must be an integer, got {node_count!r}")
    node_count = int(node_count)
    if not MIN_NODES <= node_count <= MAX_NODES:
        raise ParameterError(f"node_count must lie in [{MIN_NODES}, {MAX_NODES}], got {node_count}")
    if not (math.isfinite(t) and t > 0):
        raise ParameterError(f"t must be positive, got {t!r}")
    if x_max is None:
        x_max = discretization_extent(t, shift_hint)
    n_panels = math.ceil(node_count / X_PANEL_ORDER)
    grid = np.linspace(0.0, x_max, 20001)
    density = (1.0 + np.sqrt(np.maximum(0.0, -(grid + shift_hint))))
    density = density * np.where(grid <= min(4.0, x_max), 2.0, 1.0)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(grid))])
    breaks = np.interp(np.linspace(0.0, cum[-1], n_panels + 1), cum, grid)
    breaks[0], breaks[-1] = 0.0, x_max
    base, extra = divmod(node_count, n_panels)
    nodes, weights = [], []
    for j in range(n_panels):
        rule = gauss_legendre_rule(base + (1 if j < extra else 0))
        x, w = rule.scaled(breaks[j], breaks[j + 1])
        nodes.append(x)
        weights.append(w)
    return Discretization(float(x_max), np.concatenate(nodes), np.concatenate(weights),
                          node_count, float(t), float(shift_hint))


def _check_disc(params, disc):
    if math.isfinite(disc.t) and disc.t != params.t:
        raise ParameterError(f"discretization built for t={disc.t}, kernel has t={params.t}")


def _factors(params, disc, orders):
    """Airy block and per-order column scalings: M_k = sign_k (B c_k)(B c_k)^T."""
    _check_disc(params, disc)
    lo, hi = math.inf, -math.inf
    for o in orders:
        r_lo, r_hi, _ = weight_support(params.with_order(o))
        lo, hi = min(lo, r_lo), max(hi, r_hi)
    grid = r_panel_grid(params.t)
    ks = grid.panel_range(lo, hi)
    pieces = [grid.nodes(k) for k in ks]
    r = np.concatenate([p[0] for p in pieces])
    omega = np.concatenate([p[1] for p in pieces])
    blocks = np.hstack([disc.airy_block(params.t, k) for k in ks])
    scales = {}
    for o in orders:
        sign, lw = log_weight(o, params.log_s, r * params.t13)
        scales[o] = (sign, np.sqrt(omega * np.exp(lw)))
    return blocks, scales


def assemble(params: KernelParams, disc: Discretization, orders):
    """Nystrom matrices of the requested kernel orders at ``(s, t)``.

    Returns a dict order -> symmetric matrix.
    """
    orders = sorted(set(int(o) for o in orders))
    blocks, scales = _factors(params, disc, orders)
    out = {}
    for o in orders:
        sign, c = scales[o]
        f = blocks * c[None, :]
        m = f @ f.T
        if sign < 0:
            m = -m
        out[o] = 0.5 * (m + m.T)
    return out


def _range_basis(g, tol, max_passes=4):
    """Orthonormal basis capturing all but ``tol`` Frobenius mass of ``g``.

    Each pass diagonalises the Gram matrix of the current residual; that is
    accurate down to ~1e-8 of the residual norm, so a second pass on the
    (much smaller) leftover reaches the target.
    """
    basis = np.empty((g.shape[0], 0))
    resid = g
    for _ in range(max_passes):
        gram = resid @ resid.T
        lam, vec = linalg.eigh(0.5 * (gram + gram.T))
        lam = np.maximum(lam[::-1], 0.0)
        vec = vec[:, ::-1]
        dropped = np.sqrt(np.cumsum(lam[::-1])[::-1])
        keep = int(np.count_nonzero((dropped > tol) & (lam > 1e-15 * lam[0])))
        if keep == 0:
            break
        basis, _ = linalg.qr(np.hstack([basis, vec[:, :keep]]), mode="economic")
        resid = g - basis @ (basis.T @ g)
        if np.sqrt(np.sum(resid * resid)) <= tol:
            break
    if basis.shape[1] == 0:
        basis = np.linalg.svd(g, full_matrices=False)[0][:, :1]
    return basis


def reduced_series(params: KernelParams, disc: Discretization, n: int, tol=1e-11):
    """Matrices A_0..A_n with M_k = V A_k V^T for one orthonormal V.

    V spans the dominant left singular space of the order-normalised factors
    ``B c_k / max_j |(B c_k)_j|``.  Dropped directions carry a total
    Frobenius mass below ``tol`` relative to every factor, so traces of
    products of the M_k change by O(tol^2).
    """
    orders = list(range(n + 1))
    blocks, scales = _factors(params, disc, orders)
    col_norms = np.sqrt(np.sum(blocks * blocks, axis=0))
    g_scale = np.zeros(blocks.shape[1])
    for o in orders:
        _, c = scales[o]
        nrm = col_norms * c
        top = np.max(nrm)
        if top > 0:
            g_scale = np.maximum(g_scale, c / top)
    g = blocks * g_scale[None, :]
    basis = _range_basis(g, tol)
    proj = basis.T @ blocks
    out = []
    for o in orders:
        sign, c = scales[o]
        h = proj * c[None, :]
        a = h @ h.T
        out.append(sign * 0.5 * (a + a.T))
    return out


def nystrom_matrix(params: KernelParams, disc: Discretization):
    """``M[i, j] = sqrt(w_i w_j) K^{(n)}(x_i, x_j)`` for ``n = params.order``."""
    return assemble(params, disc, [params.order])[params.order]


def _det(a):
    lu, piv = linalg.lu_factor(a, check_finite=True)
    diag = np.diag(lu)
    if np.any(diag == 0):
        raise NumericalError("I - M is singular")
    sign = (-1.0) ** np.count_nonzero(piv != np.arange(len(piv)))
    return sign * float(np.prod(diag))


def fredholm_det(m):
    """det(I - m) by pivoted LU."""
    return _det(np.eye(m.shape[0]) - m)


def laplace_transform_value(params: KernelParams, disc: Discretization):
    """det(I - K_{s,t}) on the discretisation; equals E[exp(-s U)]."""
    if params.order != 0:
        raise ParameterError("laplace_transform_value needs a kernel of order 0")
    return fredholm_det(nystrom_matrix(params, disc))


def spectrum(params: KernelParams, disc: Discretization) -> SpectralData:
    m = nystrom_matrix(params, disc)
    try:
        ev = linalg.eigvalsh(m)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed for {params}: {exc}") from exc
    return SpectralData(ev[::-1].copy(), float(np.trace(m)), params)


def elementary_symmetric(values, l_max):
    """e_1..e_{l_max} of ``values`` from the coefficients of prod(1 + v z)."""
    e = np.zeros(l_max + 1)
    e[0] = 1.0
    for v in values:
        e[1:] = e[1:] + v * e[:-1]
    return e[1:]


def exterior_traces(params: KernelParams, disc: Discretization, l_max: int):
    """tr(K^{wedge L}) for L = 1..l_max as elementary symmetric eigenvalue sums."""
    if params.order != 0:
        raise ParameterError("exterior traces are defined for the order-0 kernel")
    if not 1 <= l_max <= disc.node_count:
        raise ParameterError(f"l_max must lie in [1, {disc.node_count}], got {l_max}")
    ev = spectrum(params, disc).eigenvalues
    return elementary_symmetric(ev, int(l_max))


# ---------------------------------------------------------------------------
# traces by direct integration


def _trace_log_integrand(params):
    t23 = params.t ** (2.0 / 3.0)
    log_s = params.log_s

    def f(r):
        _, lw = log_weight(params.order, log_s, r * params.t)
        return lw + log_aisq(t23 * r)

    return f


def trace_exact(params: KernelParams):
    """tr K^{(n)}_{s,t} = t^{2/3} int d^n_s v(s,t,r) aisq(t^{2/3} r) dr."""
    sign, log_val = log_trace_exact(params)
    return sign * math.exp(log_val)


def log_trace_exact(params: KernelParams):
    """Sign and logarithm of :func:`trace_exact`."""
    t = params.t
    t13, t23 = t ** (1.0 / 3.0), t ** (2.0 / 3.0)
    f = _trace_log_integrand(params)
    r_lo, r_hi, _ = weight_support(params)
    # locate the peak on a coarse grid in the rescaled variable
    grid = np.linspace(r_lo, r_hi, 801) / t23
    center = float(grid[np.argmax(f(grid))])

    def width(r):
        y = abs(t23 * r)
        return min(0.5, 1.0 / t13, 1.5 / math.sqrt(max(y, 1.0))) / t23

    log_int = log_integrate_positive(f, center, width, rel_tol=1e-18)
    sign = 1.0 if params.order == 0 else (-1.0) ** (params.order - 1)
    return sign, log_int + math.log(t23)


def _y_panels(lo, hi, t13):
    """Breakpoints in y = t^{2/3} r resolving the weight and the aisq wiggles."""
    edges = [lo]
    while edges[-1] < hi:
        y = edges[-1]
        edges.append(y + min(0.5, 1.0 / t13, 1.5 / math.sqrt(max(abs(y), 1.0))))
    return np.array(edges)


def log_trace_batch(order, log_s, t):
    """log |tr K^{(order)}_{s,t}| for an array of log s on one shared grid."""
    log_s = np.atleast_1d(np.asarray(log_s, dtype=float))
    t = float(t)
    t13, t23 = t ** (1.0 / 3.0), t ** (2.0 / 3.0)
    lo, hi = math.inf, -math.inf
    for ls in (log_s.min(), log_s.max()):
        r_lo, r_hi, _ = weight_support(KernelParams(math.exp(ls), t, order))
        lo, hi = min(lo, r_lo), max(hi, r_hi)
    x, w = composite_nodes(_y_panels(lo, hi, t13), 16)
    base = log_aisq(x) + np.log(w)
    out = np.empty(len(log_s))
    for i in range(0, len(log_s), 32):
        ls = log_s[i:i + 32, None]
        _, lw = log_weight(order, ls, t13 * x[None, :])
        out[i:i + 32] = logsumexp(lw + base[None, :], axis=1)
    return out


# ---------------------------------------------------------------------------
# s-derivatives


def det_taylor(mats, z):
    """Taylor coefficients in h of det(I + z M(h)), M(h) = sum_k mats[k] h^k / k!.

    ``z`` may be a scalar or a 1-d array (batched).  Returns an array of shape
    ``(len(z), n + 1)`` (or ``(n + 1,)`` for scalar z).
    """
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z))
    n = len(mats) - 1
    dim = mats[0].shape[0]
    eye = np.eye(dim)
    zz = z[:, None, None]
    c = eye[None] + zz * mats[0][None]
    dtype = np.result_type(z.dtype, mats[0].dtype)
    try:
        lu = [linalg.lu_factor(ci) for ci in c]
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"I + zM is singular: {exc}") from exc
    logdet = np.empty(len(z), dtype=complex)
    for i, (l_, piv) in enumerate(lu):
        d = np.diag(l_).astype(complex)
        if np.any(d == 0):
            raise NumericalError("I + zM is singular")
        flips = np.count_nonzero(piv != np.arange(dim))
        logdet[i] = np.sum(np.log(d)) + (1j * math.pi * flips)
    if n == 0:
        out = np.exp(logdet)[:, None]
    else:
        c_inv = np.stack([linalg.lu_solve(f, eye) for f in lu]).astype(dtype)
        nk = [None] + [zz * (mats[k][None] / math.factorial(k)) for k in range(1, n + 1)]
        y = [None] + [nk[k] @ c_inv for k in range(1, n + 1)]
        res = [c_inv]
        for m in range(1, n):
            acc = np.zeros_like(c_inv)
            for k in range(1, m + 1):
                acc -= res[m - k] @ y[k]
            res.append(acc)
        # coefficients of d/dh log det: c_m = sum_{i + k - 1 = m} k tr(R_i N_k)
        f = np.zeros((len(z), n + 1), dtype=complex)
        for m in range(n):
            acc = np.zeros(len(z), dtype=complex)
            for k in range(1, m + 2):
                i = m + 1 - k
                acc += k * np.einsum("zij,zji->z", res[i], nk[k])
            f[:, m + 1] = acc / (m + 1)
        g = np.zeros((len(z), n + 1), dtype=complex)
        g[:, 0] = 1.0
        for k in range(1, n + 1):
            acc = np.zeros(len(z), dtype=complex)
            for j in range(1, k + 1):
                acc += j * f[:, j] * g[:, k - j]
            g[:, k] = acc / k
        out = np.exp(logdet)[:, None] * g
    if np.isrealobj(z):
        out = out.real
    return out[0] if scalar else out


def det_s_derivatives(params: KernelParams, disc: Discretization, n: int, with_value=False):
    """d^k/ds^k det(I - M(s)) for k = 1..n by exact matrix calculus.

    The kernel matrices of orders 0..n give the Taylor expansion
    M(s + h) = sum_k M_k h^k / k!; the log-determinant is expanded through
    the resolvent series and exponentiated with the Bell recurrence.
    """
    if not 1 <= n <= 8:
        raise ParameterError(f"derivative count must lie in [1, 8], got {n}")
    mats = assemble(params.with_order(0), disc, range(n + 1))
    coefs = det_taylor([mats[k] for k in range(n + 1)], -1.0)
    derivs = np.array([math.factorial(k) * coefs[k] for k in range(n + 1)])
    return derivs if with_value else derivs[1:]


def _sym_from_eigs(ev, l_max):
    """e_1..e_{l_max} of each row of complex eigenvalues, shape (rows, l_max)."""
    e = np.zeros((ev.shape[0], l_max + 1), dtype=ev.dtype)
    if l_max == 0:
        return e[:, 1:]
    e[:, 0] = 1.0
    for j in range(ev.shape[1]):
        e[:, 1:] = e[:, 1:] + ev[:, j:j + 1] * e[:, :-1]
    return e[:, 1:]


def exterior_from_series(red, n, l_max):
    """Derivatives of e_L(M(s + h)) from the truncated polynomial P(h).

    e_L(P(h)) is a polynomial of degree <= nL in h whose first n + 1 Taylor
    coefficients agree with those of e_L(M(s + h)), so interpolation at
    nL + 1 points of any interval [-delta, delta] recovers them exactly.
    For real h, P(h) is symmetric and its eigenvalues are well conditioned.
    The radius only steers rounding: each A_k is +-PSD, so
    N(delta) = sum_k delta^k |tr A_k| / k! bounds the nuclear norm of P,
    and each (L, m) uses the radius minimising N^L / (L! delta^m).
    """
    red = np.asarray(red[:n + 1])
    deg = n * l_max
    x = np.cos(math.pi * (np.arange(deg + 1) + 0.5) / (deg + 1))
    fact = np.array([math.factorial(m) for m in range(n + 1)], dtype=float)
    log_tr = np.log(np.maximum(np.abs(np.trace(red, axis1=1, axis2=2)), 1e-300))
    # radii on a factor-4 grid, wide enough for any s in the pipeline
    log_d = np.log(4.0) * np.arange(-40, 41)
    log_n = special.logsumexp(log_tr[None, :] + np.outer(log_d, np.arange(n + 1))
                              - np.log(fact)[None, :], axis=1)
    ells = np.arange(1, l_max + 1)
    ms = np.arange(n + 1)
    cost = (ells[None, :, None] * log_n[:, None, None]
            - ms[None, None, :] * log_d[:, None, None])
    choice = np.argmin(cost, axis=0)  # (l_max, n + 1)
    out = np.zeros((l_max, n + 1))
    for j in np.unique(choice):
        delta = math.exp(log_d[j])
        pw = (delta * x)[:, None] ** ms[None, :] / fact[None, :]
        mats = np.einsum("zk,kij->zij", pw, red)
        ev = np.linalg.eigvalsh(mats)
        with np.errstate(over="ignore", invalid="ignore"):
            # radii chosen for small L may overflow the unused large-L columns
            el = _sym_from_eigs(ev, l_max)  # (deg + 1, l_max)
        with np.errstate(over="ignore", invalid="ignore"):
            cheb = np.polynomial.chebyshev.chebfit(x, np.nan_to_num(el), deg)
            mono = np.stack([np.polynomial.chebyshev.cheb2poly(cheb[:, i])
                             for i in range(l_max)])
        mono = mono[:, :n + 1] / delta ** ms[None, :] * fact[None, :]
        sel = choice == j
        out[sel] = mono[sel]
    if not np.all(np.isfinite(out)):
        raise NumericalError("exterior trace derivatives are not finite")
    return out


def exterior_trace_derivatives(params: KernelParams, disc: Discretization, n: int, l_max: int):
    """Array ``E[L-1, m] = d^m/ds^m tr(K^{wedge L})`` for L <= l_max, m <= n.

    The h-polynomial is sampled at real points and the elementary symmetric
    functions of its eigenvalues are interpolated, which avoids the
    cancellation of power-sum identities.
    """
    if not 1 <= l_max <= 8:
        raise ParameterError(f"l_max must lie in [1, 8], got {l_max}")
    return exterior_from_series(reduced_series(params, disc, n), n, l_max)


def taylor_point(params: KernelParams, disc: Discretization, n: int, l_max: int = 0):
    """Determinant and exterior-trace s-derivatives at one s, sharing assembly.

    Returns ``(dets, ext)`` with ``dets[k] = D^{(k)}(s)`` for k <= n and
    ``ext`` as in :func:`exterior_trace_derivatives` (``None`` if l_max = 0).
    """
    red = reduced_series(params, disc, n)
    coefs = det_taylor(red, -1.0)
    dets = np.array([math.factorial(k) * coefs[k] for k in range(n + 1)])
    ext = exterior_from_series(red, n, l_max) if l_max > 0 else None
    return dets, ext
