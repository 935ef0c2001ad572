"""Spectral density of Lamperti transforms, the cosine transform h1, and drift envelopes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .covariance import lamperti_autocov
from .processes import ProcessSpec
from .quadrature import QuadratureError


class TruncationError(QuadratureError):
    """Tail of a truncated infinite integral exceeds the tolerance."""


@dataclass(frozen=True)
class SpectralDensity:
    x: np.ndarray
    p: np.ndarray
    limit_at_zero: float


def _truncation_point(r, tol: float, tau_cap: float = 1e4):
    """Smallest doubling ``tau`` with an exponential tail estimate below ``tol``."""
    tau = 8.0
    tail = math.inf
    while tau <= tau_cap:
        r1, r2 = abs(float(r(tau / 2))), abs(float(r(tau)))
        if r2 == 0.0:
            return tau, 0.0
        if r1 > r2:
            rate = 2.0 * math.log(r1 / r2) / tau
            tail = r2 / rate
            if tail < tol:
                return tau, tail
        tau *= 2.0
    raise TruncationError("autocovariance tail does not decay fast enough", tail)


def spectral_density(spec: ProcessSpec, x_grid, tol: float = 1e-10) -> SpectralDensity:
    """``p(x) = (1/pi) int_0^inf cos(tau x) r(tau) dtau`` for the Lamperti autocovariance ``r``.

    The integral is truncated where an exponential fit of the tail of ``|r|``
    falls below ``tol``; :class:`TruncationError` is raised if that never
    happens.  Oscillatory pieces use QUADPACK's cosine-weighted rule.
    """
    x = np.asarray(x_grid, dtype=np.float64)

    def r(tau):
        return float(lamperti_autocov(spec, tau))

    tau_max, _ = _truncation_point(r, tol)

    def one(xv):
        xv = abs(float(xv))
        if xv == 0.0:
            val, err = integrate.quad(r, 0.0, tau_max, epsabs=tol, epsrel=1e-12, limit=500)[:2]
        else:
            val, err = integrate.quad(
                r, 0.0, tau_max, weight="cos", wvar=xv, epsabs=tol, epsrel=1e-12, limit=500
            )[:2]
        if err > 1e3 * tol + 1e-9 * abs(val):
            raise QuadratureError(f"spectral density at x={xv}", err)
        return val / math.pi

    p = np.array([one(v) for v in x.ravel()]).reshape(x.shape)
    return SpectralDensity(x, p, one(0.0))


def _cos_power_integral(alpha: float, Y: float) -> float:
    """``int_0^Y y^-alpha cos(y) dy``."""
    head_end = min(Y, 1.0)
    head = integrate.quad(
        np.cos, 0.0, head_end, weight="alg", wvar=(-alpha, 0.0), epsabs=1e-15, epsrel=1e-13
    )[0]
    if Y <= 1.0:
        return head
    val, err = integrate.quad(
        lambda y: y**-alpha,
        1.0,
        Y,
        weight="cos",
        wvar=1.0,
        epsabs=1e-14,
        epsrel=1e-12,
        limit=20000,
        maxp1=500,
    )[:2]
    if err > 1e-8:
        raise QuadratureError(f"oscillatory integral up to {Y}", err)
    return head + val


def h1_tilde(alpha: float, x0: float, tau: float) -> float:
    """``2 int_0^x0 x^-alpha cos(tau x) dx``, evaluated as ``2 tau^(alpha-1) int_0^(tau x0) y^-alpha cos y dy``."""
    if not 0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 1/2)")
    if not (x0 > 0 and tau > 0):
        raise ValueError("x0 and tau must be positive")
    return 2.0 * tau ** (alpha - 1.0) * _cos_power_integral(alpha, tau * x0)


def c0_closed_form(alpha: float) -> float:
    """``2 Gamma(1 - alpha) sin(pi alpha / 2)``."""
    return 2.0 * math.gamma(1.0 - alpha) * math.sin(0.5 * math.pi * alpha)


def c0_constant(alpha: float, n_terms: int = 60, n_averages: int = 30) -> float:
    """``2 int_0^inf y^-alpha cos(y) dy`` by half-period partial sums.

    The integral is split at the zeros ``(k + 1/2) pi`` of the cosine.  The
    resulting alternating series converges slowly, so the partial sums are
    accelerated by repeated averaging of neighbours (Euler transform).
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    edges = (np.arange(n_terms + 1) + 0.5) * math.pi
    first = integrate.quad(
        np.cos, 0.0, edges[0], weight="alg", wvar=(-alpha, 0.0), epsabs=1e-16, epsrel=1e-14
    )[0]
    # Gauss-Legendre on each half period; the integrand is smooth there
    nodes, weights = np.polynomial.legendre.leggauss(24)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    y = mid[:, None] + half[:, None] * nodes
    pieces = (half[:, None] * weights * y**-alpha * np.cos(y)).sum(axis=1)
    sums = first + np.concatenate([[0.0], np.cumsum(pieces)])
    for _ in range(n_averages):
        sums = 0.5 * (sums[1:] + sums[:-1])
    return 2.0 * float(sums[-1])


def h1_asymptotic_ratio(alpha: float, taus, x0: float = 1.0) -> np.ndarray:
    """``h1_tilde(tau) tau^(1-alpha) / c0`` for each ``tau``; tends to 1 as ``tau`` grows."""
    c0 = c0_constant(alpha)
    return np.array([h1_tilde(alpha, x0, t) * t ** (1.0 - alpha) / c0 for t in np.ravel(taus)])


# ---------------------------------------------------------------------------
# drift envelope
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DriftEnvelope:
    """Drift ``h(t) = c t^H (log t)^(alpha-1)`` for ``t >= t_floor`` and 0 before.

    ``knee = exp((1 - alpha) / H)`` is where ``h`` attains its minimum over
    ``t > 1``; ``h`` increases beyond it.  ``crossover`` is the time after
    which ``h(t) > t^gamma``.
    """

    H: float
    alpha: float
    c: float
    t_floor: float
    gamma: float
    knee: float
    crossover: float

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        out = np.zeros(t.shape)
        on = t >= self.t_floor
        ts = t[on]
        out[on] = self.c * ts**self.H * np.log(ts) ** (self.alpha - 1.0)
        return out[()] if out.ndim == 0 else out


def _crossover(H: float, alpha: float, gamma: float, c: float, t_floor: float) -> float:
    # largest root of log c + (H - gamma) u + (alpha - 1) log u = 0 in u = log t
    def f(u):
        return math.log(c) + (H - gamma) * u + (alpha - 1.0) * math.log(u)

    u_min = (1.0 - alpha) / (H - gamma)
    if f(u_min) >= 0:
        return t_floor
    hi = 2.0 * u_min
    while f(hi) < 0:
        hi *= 2.0
    root = optimize.brentq(f, u_min, hi, xtol=1e-14, rtol=1e-14)
    return max(math.exp(root) if root < 700 else math.inf, t_floor)


def build_drift(H: float, alpha: float = 0.25, gamma: float = 0.5, c: float | None = None) -> DriftEnvelope:
    """Drift envelope of order ``t^H (log t)^(alpha-1)`` that dominates ``t^gamma`` eventually.

    By default ``c`` is chosen so that the minimum of ``h`` over ``t > 1``
    (attained at the knee) equals 1, and the envelope is switched on from the
    knee onwards; thus ``h >= 1`` wherever it is non-zero.
    """
    if not 0 < H < 1:
        raise ValueError("H must lie in (0, 1)")
    if not 0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 1/2)")
    if not 0 < gamma < H:
        raise ValueError(f"need 0 < gamma < H, got gamma={gamma}, H={H}")
    u_knee = (1.0 - alpha) / H
    knee = math.exp(u_knee)
    base = knee**H * u_knee ** (alpha - 1.0)
    if c is None:
        c = 1.0 / base
    elif not c > 0:
        raise ValueError("c must be positive")
    t_floor = knee if c * base >= 1.0 else _floor_for(H, alpha, c, u_knee)
    return DriftEnvelope(H, alpha, float(c), t_floor, gamma, knee, _crossover(H, alpha, gamma, c, t_floor))


def _floor_for(H: float, alpha: float, c: float, u_knee: float) -> float:
    # first t beyond the knee with h(t) >= 1
    def f(u):
        return math.log(c) + H * u + (alpha - 1.0) * math.log(u)

    hi = 2.0 * u_knee
    while f(hi) < 0:
        hi *= 2.0
    return math.exp(optimize.brentq(f, u_knee, hi, xtol=1e-14))
