"""Covariance functions, Molchan-Golosov kernels and covariance matrices.

Every covariance handled here is a sum of terms that are homogeneous in
``(s, t)``: ``w * hi**deg * f(lo / hi)`` with ``lo = min(s, t)`` and
``hi = max(s, t)``.  Matrix assembly exploits this.  On a log-uniform grid the
ratio ``lo / hi`` only takes ``n`` distinct values, so each ratio function is
evaluated ``n`` times instead of ``n**2``.

Ratio functions take the pair ``(x, omx)`` with ``omx = 1 - x`` supplied
separately, so lags close to the diagonal do not lose digits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .processes import ProcessSpec, TimeGrid
from .quadrature import (
    DEFAULT_QUADRATURE,
    QuadratureConfig,
    adaptive_quad,
    tanh_sinh_rule,
)


class DomainError(ValueError):
    """Argument outside the domain of a covariance routine."""


class CovarianceError(np.linalg.LinAlgError):
    """Covariance matrix is not positive semidefinite within the jitter cap."""

    def __init__(self, message: str, min_eigenvalue: float):
        super().__init__(f"{message}; most negative eigenvalue estimate {min_eigenvalue:.3e}")
        self.min_eigenvalue = min_eigenvalue


def _check_fbm_h(H: float) -> float:
    H = float(H)
    if not 0 < H < 1:
        raise DomainError(f"Hurst parameter must lie in (0, 1), got {H}")
    return H


def _check_rl_h(H: float) -> float:
    H = float(H)
    if not H > 0 or not math.isfinite(H):
        raise DomainError(f"Riemann-Liouville index must be positive, got {H}")
    return H


def _check_times(s, t):
    s = np.asarray(s, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if np.any(s < 0) or np.any(t < 0):
        raise DomainError("times must be non-negative")
    return s, t


def _homogeneous(s, t, deg, ratio_fn):
    """Evaluate ``hi**deg * ratio_fn(lo/hi, 1 - lo/hi)`` with zeros at the origin."""
    s, t = _check_times(s, t)
    lo, hi = np.minimum(s, t), np.maximum(s, t)
    pos = lo > 0
    out = np.zeros(np.broadcast(lo, hi).shape)
    if np.any(pos):
        lo_p, hi_p = np.broadcast_to(lo, out.shape)[pos], np.broadcast_to(hi, out.shape)[pos]
        x = lo_p / hi_p
        omx = (hi_p - lo_p) / hi_p
        out[pos] = hi_p**deg * ratio_fn(x, omx)
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# fractional Brownian motion
# ---------------------------------------------------------------------------


def _fbm_ratio(H):
    p = 2.0 * H

    def f(x, omx):
        # 1/2 (x^p + 1 - (1-x)^p); the expm1/log1p form avoids cancellation near x = 0
        x = np.asarray(x, dtype=np.float64)
        omx = np.asarray(omx, dtype=np.float64)
        near = 0.5 * (x**p + 1.0 - omx**p)
        with np.errstate(divide="ignore", invalid="ignore"):
            far = 0.5 * (x**p - np.expm1(p * np.log1p(-x)))
        return np.where(x < 0.5, far, near)

    return f


def fbm_cov(H: float, s, t):
    """Covariance ``1/2 (s^2H + t^2H - |t - s|^2H)`` of normalized FBM.

    Vectorized over ``s`` and ``t``.  Evaluated as ``hi^2H g(lo/hi)`` so that
    far-apart times do not suffer cancellation.
    """
    H = _check_fbm_h(H)
    return _homogeneous(s, t, 2.0 * H, _fbm_ratio(H))


def normalizing_constant(H: float) -> float:
    """Constant ``C(H)`` that makes the Molchan-Golosov representation unit-variance."""
    H = _check_fbm_h(H)
    return math.sqrt(
        2.0 * H * math.gamma(1.5 - H) * math.gamma(H + 0.5) / math.gamma(2.0 - 2.0 * H)
    )


# ---------------------------------------------------------------------------
# Molchan-Golosov kernel
# ---------------------------------------------------------------------------


def molchan_golosov_kernel(
    H: float, t: float, s: float, q: QuadratureConfig = DEFAULT_QUADRATURE
) -> float:
    """Kernel ``K_H(t, s)`` of the Volterra representation ``B^H_t = int K_H(t, s) dW_s``.

    Adaptive quadrature on the inner integral after the substitution
    ``u = s + w**(1/e)``, where ``e`` is the exponent of the ``(u - s)``
    factor plus one.  For ``H > 1/2`` (``e = H - 1/2``)::

        K = C/Gamma(e) s^-e  int_0^{(t-s)^e} (s + w^(1/e))^e dw / e

    and for ``H < 1/2`` (``e = H + 1/2``)::

        K = C/Gamma(e) [ (t(t-s)/s)^(H-1/2)
                         + (1/2-H) s^(1/2-H) int_0^{(t-s)^e} (s + w^(1/e))^(H-3/2) dw / e ]

    Parameters
    ----------
    H : float
        Hurst parameter in (0, 1).
    t, s : float
        Times with ``0 < s < t``.
    q : QuadratureConfig
        Tolerances; failure raises :class:`QuadratureError`.
    """
    H = _check_fbm_h(H)
    t, s = float(t), float(s)
    if not 0 < s < t:
        raise DomainError(f"kernel needs 0 < s < t, got s={s}, t={t}")
    if H == 0.5:
        return 1.0
    C = normalizing_constant(H)
    if H > 0.5:
        e = H - 0.5
        p = 1.0 / e
        val = _split_quad(lambda w: (s + w**p) ** e, (t - s) ** e, s**e, q)
        return C / math.gamma(e) * s ** (-e) * p * val
    e = H + 0.5
    p = 1.0 / e
    val = _split_quad(lambda w: (s + w**p) ** (H - 1.5), (t - s) ** e, s**e, q)
    return (
        C
        / math.gamma(e)
        * ((t * (t - s) / s) ** (H - 0.5) + (0.5 - H) * s ** (0.5 - H) * p * val)
    )


def _split_quad(func, top: float, kink: float, q: QuadratureConfig) -> float:
    # The substituted integrand changes character where w^p ~ s, i.e. w ~ kink.
    # Splitting geometrically from the kink keeps every piece well scaled even
    # when s is many orders of magnitude below t.
    edges = [0.0]
    edge = kink
    while edge < top:
        edges.append(edge)
        edge *= 16.0
    edges.append(top)
    return math.fsum(
        adaptive_quad(func, lo, hi, q, "Molchan-Golosov kernel")
        for lo, hi in zip(edges[:-1], edges[1:])
    )


def _kernel_rule(*hursts):
    # level 5 reaches ~1e-9 relative for H >= 0.15; rougher kernels need level 6
    level = 6 if min(hursts) < 0.15 else 5
    return tanh_sinh_rule(level, 5.5)


def _unit_kernel(H: float, s, d):
    """Bulk ``K_H(1, s)`` for arrays ``s`` in (0, 1) with ``d = 1 - s`` given exactly.

    Fixed tanh-sinh rule after ``u = s + d y``.  For ``H > 1/2`` the
    ``y^(e-1)`` singularity is integrated analytically and only the smooth
    remainder goes through the rule.
    """
    s = np.ascontiguousarray(s, dtype=np.float64).ravel()
    d = np.ascontiguousarray(d, dtype=np.float64).ravel()
    if H == 0.5:
        return np.ones_like(s)
    y, _, w = _kernel_rule(H)
    C = normalizing_constant(H)
    r = d / s
    c = H - 0.5
    if H > 0.5:
        tail = _accel.mg_sum_upper(c, c - 1.0, r, y, w)
        return C / math.gamma(c) * d**c * (1.0 / c + tail)
    tail = _accel.mg_sum_lower(c, r, y, w)
    return C / math.gamma(H + 0.5) * (r**c - c * r * d**c * tail)


def kernel_values(H: float, t, s):
    """Vectorized ``K_H(t, s)`` for ``0 < s < t`` via a fixed high-order rule.

    Same function as :func:`molchan_golosov_kernel`; used where many values
    are needed.  Relies on ``K_H(ct, cs) = c^(H-1/2) K_H(t, s)``.
    """
    H = _check_fbm_h(H)
    t, s = np.broadcast_arrays(np.asarray(t, dtype=np.float64), np.asarray(s, dtype=np.float64))
    if np.any(s <= 0) or np.any(s >= t):
        raise DomainError("kernel needs 0 < s < t")
    shape = t.shape
    x = (s / t).ravel()
    d = ((t - s) / t).ravel()
    out = t.ravel() ** (H - 0.5) * _unit_kernel(H, x, d)
    return out.reshape(shape)[()] if shape == () else out.reshape(shape)


def _unit_product(H1: float, H2: float, rho, omrho):
    """``int_0^rho K_H1(1, u) K_H2(rho, u) du`` for arrays ``rho`` in (0, 1].

    Uses ``u = rho y`` and homogeneity of the second kernel, so the second
    factor is a fixed table over the nodes.
    """
    y, ym, w = _kernel_rule(H1, H2)
    rho = np.atleast_1d(np.asarray(rho, dtype=np.float64))
    omrho = np.atleast_1d(np.asarray(omrho, dtype=np.float64))
    k2 = _unit_kernel(H2, y, ym)
    out = np.empty(rho.shape)
    step = max(1, 65536 // y.size)
    for lo in range(0, rho.size, step):
        r = rho[lo : lo + step, None]
        om = omrho[lo : lo + step, None]
        s = (r * y).ravel()
        d = (om + r * ym).ravel()
        k1 = _unit_kernel(H1, s, d).reshape(r.shape[0], y.size)
        out[lo : lo + step] = r[:, 0] ** (H2 + 0.5) * (k1 @ (w * k2))
    return out


def kernel_product_integral(H1: float, H2: float, s: float, t: float) -> float:
    """``int_0^{min(s,t)} K_H1(s, u) K_H2(t, u) du`` by the bulk rule.

    With ``H1 = H2 = H`` this equals ``fbm_cov(H, s, t)`` (Ito isometry).
    """
    H1, H2 = _check_fbm_h(H1), _check_fbm_h(H2)
    s, t = float(s), float(t)
    if s < 0 or t < 0:
        raise DomainError("times must be non-negative")
    if s == 0 or t == 0:
        return 0.0
    if s >= t:
        # K_H1(s, .) carries the larger time
        x = t / s
        return float(s ** (H1 + H2) * _unit_product(H1, H2, x, (s - t) / s)[0])
    x = s / t
    return float(t ** (H1 + H2) * _unit_product(H2, H1, x, (t - s) / t)[0])


def _cross_ratio(H: float, K: float):
    """``g(x) = int_0^x [K_H(1,u) K_K(x,u) + K_H(x,u) K_K(1,u)] du``, homogeneous degree H+K."""

    def g(x, omx):
        return _unit_product(H, K, x, omx) + _unit_product(K, H, x, omx)

    return g


def kernel_cross_integral(H: float, K: float, s, t):
    """Cross term ``int_0^{s^t} [K_H(t,u) K_K(s,u) + K_H(s,u) K_K(t,u)] du``."""
    H, K = _check_fbm_h(H), _check_fbm_h(K)
    return _homogeneous(s, t, H + K, _unique_ratio(_cross_ratio(H, K)))


def _unique_ratio(fn):
    """Wrap an expensive ratio function so repeated ratios are evaluated once."""

    def f(x, omx):
        x = np.asarray(x, dtype=np.float64)
        omx = np.asarray(omx, dtype=np.float64)
        shape = np.broadcast(x, omx).shape
        xf = np.broadcast_to(x, shape).ravel()
        of = np.broadcast_to(omx, shape).ravel()
        keys, first, inv = np.unique(xf, return_index=True, return_inverse=True)
        return fn(keys, of[first])[inv].reshape(shape)

    return f


def _check_mixture(a: float, b: float, H: float, K: float):
    H, K = _check_fbm_h(H), _check_fbm_h(K)
    if not K < H:
        raise DomainError(f"mixtures need K < H, got H={H}, K={K}")
    if a * b == 0:
        raise DomainError("mixtures need a*b != 0")
    return float(a), float(b), H, K


def ccm_cov(a: float, b: float, H: float, K: float, s, t, q: QuadratureConfig = DEFAULT_QUADRATURE):
    """Covariance of ``a B^H + b B^K`` with both FBMs driven by one Brownian motion."""
    a, b, H, K = _check_mixture(a, b, H, K)
    return (
        a * a * fbm_cov(H, s, t)
        + b * b * fbm_cov(K, s, t)
        + a * b * kernel_cross_integral(H, K, s, t)
    )


# ---------------------------------------------------------------------------
# Riemann-Liouville and integrated FBM
# ---------------------------------------------------------------------------


def _rl_unit(H: float, delta: float, q: QuadratureConfig) -> float:
    # int_0^1 y^b (delta + y)^b dy
    b = H - 0.5
    if b == 0:
        return 1.0
    if delta == 0:
        return 1.0 / (2.0 * H)
    return adaptive_quad(
        lambda y: (delta + y) ** b, 0.0, 1.0, q, "Riemann-Liouville covariance",
        weight="alg", wvar=(b, 0.0),
    )


def _rl_ratio(H: float, q: QuadratureConfig, bulk_threshold: int = 20000):
    b = H - 0.5

    def f(x, omx):
        x = np.asarray(x, dtype=np.float64)
        omx = np.asarray(omx, dtype=np.float64)
        if b == 0:
            return x.copy()
        if x.size <= bulk_threshold:
            # cov(x, 1) = x^2H J((1-x)/x)
            out = np.array([xi ** (2 * H) * _rl_unit(H, oi / xi, q) for xi, oi in zip(x.ravel(), omx.ravel())])
            return out.reshape(x.shape)
        # many ratios: fixed rule on x^(H+1/2) int y^b (omx + x y)^b dy
        y, _, w = tanh_sinh_rule()
        wy = w * y**b
        out = np.empty(x.size)
        xf, of = x.ravel(), omx.ravel()
        step = max(1, 65536 // y.size)
        for lo in range(0, xf.size, step):
            xs = xf[lo : lo + step, None]
            os_ = of[lo : lo + step, None]
            out[lo : lo + step] = xs[:, 0] ** (H + 0.5) * ((os_ + xs * y) ** b @ wy)
        return out.reshape(x.shape)

    return f


def rl_cov(H: float, s, t, q: QuadratureConfig = DEFAULT_QUADRATURE):
    """Covariance ``int_0^{s^t} (t-u)^(H-1/2) (s-u)^(H-1/2) du`` of the Riemann-Liouville process."""
    H = _check_rl_h(H)
    return _homogeneous(s, t, 2.0 * H, _unique_ratio(_rl_ratio(H, q)))


def _binom_tail(q: float, x):
    """``(1-x)^q - 1 + q x`` without cancellation for small ``x``."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty(x.shape)
    small = x < 0.25
    xs = x[small]
    term = 0.5 * q * (q - 1.0) * xs * xs
    acc = term.copy()
    for k in range(2, 80):
        term = term * (q - k) / (k + 1) * (-xs)
        acc += term
        if not np.any(np.abs(term) > 1e-18 * np.abs(acc)):
            break
    out[small] = acc
    xl = x[~small]
    out[~small] = (1.0 - xl) ** q - 1.0 + q * xl
    return out


def _ifbm_ratio(H: float):
    p = 2.0 * H
    q = p + 2.0

    def f(x, omx):
        x = np.asarray(x, dtype=np.float64)
        return 0.5 * (
            x ** (p + 1.0) / (p + 1.0)
            - x**q / ((p + 1.0) * q)
            + _binom_tail(q, x) / ((p + 1.0) * q)
        )

    return f


def ifbm_cov(H: float, s, t):
    """Covariance of ``int_0^t B^H_u du`` in closed form.

    For ``s <= t``::

        1/2 [ (t s^(2H+1) + s t^(2H+1)) / (2H+1)
              - (t^(2H+2) + s^(2H+2) - (t-s)^(2H+2)) / ((2H+1)(2H+2)) ]
    """
    H = _check_fbm_h(H)
    return _homogeneous(s, t, 2.0 * H + 2.0, _ifbm_ratio(H))


def _bm_ratio(x, omx):
    return np.asarray(x, dtype=np.float64).copy()


# ---------------------------------------------------------------------------
# integrated cross term of correlated mixtures
# ---------------------------------------------------------------------------


def _integrated_cross_ratio(H: float, K: float):
    """``I(x, 1) = int_0^x int_0^1 g(u, v) du dv`` for the cross term ``g``.

    With ``G(x) = int_0^x g(r, 1) dr`` and ``gamma = H + K``, homogeneity
    reduces the double integral to one-dimensional ones::

        I(x, 1) = [x^(gamma+2) G(1) + G(x) + x^(gamma+2) int_x^1 g(r, 1) r^(-gamma-2) dr]
                  / (gamma + 2)
    """
    gam = H + K
    g = _cross_ratio(H, K)
    y, ym, w = tanh_sinh_rule(level=4, kmax=3.5)

    def G(x):
        return x * np.dot(w, g(x * y, 1.0 - x * y))

    def upper(x, omx):
        # int_x^1 g(r) r^(-gam-2) dr with r = x + omx*y
        r = x + omx * y
        om = omx * ym
        return omx * np.dot(w, g(r, om) * r ** (-gam - 2.0))

    G1 = G(1.0)

    def f(x, omx):
        out = np.empty(np.shape(x))
        for i, (xi, oi) in enumerate(zip(np.ravel(x), np.ravel(omx))):
            xp = xi ** (gam + 2.0)
            up = upper(xi, oi) if oi > 0 else 0.0
            out.flat[i] = (xp * G1 + G(xi) + xp * up) / (gam + 2.0)
        return out

    return f


def integrated_cross_cov(H: float, K: float, s, t):
    """Double integral of the correlated cross term over ``[0, s] x [0, t]``.

    Intended for small grids; each distinct ratio costs a few hundred kernel
    table evaluations.
    """
    H, K = _check_fbm_h(H), _check_fbm_h(K)
    return _homogeneous(s, t, H + K + 2.0, _unique_ratio(_integrated_cross_ratio(H, K)))


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def homogeneous_terms(spec: ProcessSpec, q: QuadratureConfig = DEFAULT_QUADRATURE):
    """Decomposition of the covariance of ``spec`` into ``(weight, degree, ratio_fn)`` terms."""
    kind = spec.kind
    if kind == "bm":
        return [(1.0, 1.0, _bm_ratio)]
    if kind == "fbm":
        return [(1.0, 2.0 * spec.H, _fbm_ratio(spec.H))]
    if kind == "rl":
        return [(1.0, 2.0 * spec.H, _unique_ratio(_rl_ratio(spec.H, q)))]
    if kind == "ifbm":
        return [(1.0, 2.0 * spec.H + 2.0, _ifbm_ratio(spec.H))]
    terms = []
    for weight, comp in spec.components():
        terms.extend((weight * weight * w, d, f) for w, d, f in homogeneous_terms(comp, q))
    if kind == "ccm":
        terms.append((spec.a * spec.b, spec.H + spec.K, _unique_ratio(_cross_ratio(spec.H, spec.K))))
    elif kind == "iccm":
        terms.append(
            (
                spec.a * spec.b,
                spec.H + spec.K + 2.0,
                _unique_ratio(_integrated_cross_ratio(spec.H, spec.K)),
            )
        )
    return terms


def mixed_cov(spec: ProcessSpec, s, t, q: QuadratureConfig = DEFAULT_QUADRATURE):
    """Covariance ``E[X_s X_t]`` for any :class:`ProcessSpec` (vectorized over s, t)."""
    total = 0.0
    for weight, deg, fn in homogeneous_terms(spec, q):
        total = total + weight * _homogeneous(s, t, deg, fn)
    return total


def variance(spec: ProcessSpec, t):
    """Analytic ``Var(X_t)``."""
    t = np.asarray(t, dtype=np.float64)
    return mixed_cov(spec, t, t)


def lamperti_autocov(spec: ProcessSpec, tau, q: QuadratureConfig = DEFAULT_QUADRATURE):
    """Autocovariance ``r(tau) = e^(-d|tau|) E[X_1 X_(e^|tau|)]`` of the Lamperti transform.

    ``d`` is the self-similarity index.  Only self-similar (pure) processes
    have a stationary Lamperti transform.
    """
    if not spec.is_pure:
        raise DomainError(f"{spec.kind} is not self-similar; no Lamperti autocovariance")
    tau = np.abs(np.asarray(tau, dtype=np.float64))
    d = spec.index
    x = np.exp(-tau)
    omx = -np.expm1(-tau)
    out = np.zeros(tau.shape)
    for weight, deg, fn in homogeneous_terms(spec, q):
        # hi = e^tau, so hi^deg * f(x) * e^(-d tau) = e^((deg - d) tau) f(x)
        out = out + weight * np.exp((deg - d) * tau) * fn(x, omx)
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# matrices
# ---------------------------------------------------------------------------

JITTER_LADDER = (0.0, 1e-15, 1e-14, 1e-13, 1e-12, 1e-11, 1e-10)


@dataclass(frozen=True)
class CovarianceMatrix:
    """Dense covariance over a grid plus the factor used to certify it.

    ``entries`` includes the origin row/column (all zeros) when the grid has
    one.  ``factor`` is the lower Cholesky factor of the positive-time block
    after adding ``jitter_applied`` to its diagonal.
    """

    spec: ProcessSpec
    grid: TimeGrid
    entries: np.ndarray = field(repr=False)
    jitter_applied: float
    factor: np.ndarray = field(repr=False)

    @property
    def positive_block(self) -> np.ndarray:
        k = 1 if self.grid.includes_origin else 0
        return self.entries[k:, k:]


def _ratio_table(grid: TimeGrid):
    """Pairwise ``(x, omx, hi)`` source for matrix assembly over positive times."""
    t = grid.positive_times
    if grid.policy == "lamperti":
        lags = np.arange(t.size) * grid.log_step
        return "lag", np.exp(-lags), -np.expm1(-lags), t
    return "pair", None, None, t


def assemble(spec: ProcessSpec, grid: TimeGrid, q: QuadratureConfig = DEFAULT_QUADRATURE) -> np.ndarray:
    """Covariance entries over the positive times of ``grid`` (no certification)."""
    mode, x, omx, t = _ratio_table(grid)
    n = t.size
    out = np.zeros((n, n))
    idx = np.arange(n)
    for weight, deg, fn in homogeneous_terms(spec, q):
        if mode == "lag":
            vals = weight * fn(x, omx)
            tp = t**deg
            for i in range(n):
                # row i: hi = t[max(i, j)], lag |i - j|
                out[i, :i] += tp[i] * vals[i - idx[:i]]
                out[i, i:] += tp[i:] * vals[idx[i:] - i]
        else:
            lo = np.minimum.outer(t, t)
            hi = np.maximum.outer(t, t)
            iu = np.triu_indices(n)
            xs = lo[iu] / hi[iu]
            om = (hi[iu] - lo[iu]) / hi[iu]
            vals = weight * hi[iu] ** deg * fn(xs, om)
            upper = np.zeros((n, n))
            upper[iu] = vals
            out += upper + np.triu(upper, 1).T
    return out


def certify(entries: np.ndarray, max_relative_jitter: float = 1e-10):
    """Cholesky with escalating diagonal jitter; returns ``(factor, jitter)``."""
    n = entries.shape[0]
    if n == 0:
        return np.zeros((0, 0)), 0.0
    scale = float(np.max(np.diag(entries)))
    if not scale > 0:
        raise CovarianceError("covariance has no positive diagonal entry", scale)
    for rel in JITTER_LADDER:
        if rel > max_relative_jitter:
            break
        jitter = rel * scale
        try:
            factor = np.linalg.cholesky(entries + jitter * np.eye(n))
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(factor)):
            return factor, jitter
    lam = float(np.linalg.eigvalsh(entries)[0])
    raise CovarianceError(
        f"factorization failed with jitter up to {max_relative_jitter:g} x max diagonal", lam
    )


def cov_matrix(
    spec: ProcessSpec,
    grid: TimeGrid,
    q: QuadratureConfig = DEFAULT_QUADRATURE,
    max_relative_jitter: float = 1e-10,
) -> CovarianceMatrix:
    """Assemble and certify the covariance matrix of ``spec`` on ``grid``.

    Raises
    ------
    CovarianceError
        If no jitter up to ``max_relative_jitter * max(diag)`` makes the
        positive-time block factorizable; carries the smallest eigenvalue.
    """
    block = assemble(spec, grid, q)
    factor, jitter = certify(block, max_relative_jitter)
    if grid.includes_origin:
        n = block.shape[0] + 1
        full = np.zeros((n, n))
        full[1:, 1:] = block
    else:
        full = block
    full.setflags(write=False)
    factor.setflags(write=False)
    return CovarianceMatrix(spec, grid, full, jitter, factor)
