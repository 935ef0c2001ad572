"""Quadrature settings and the fixed tanh-sinh rule used for bulk kernel sums."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate


class QuadratureError(ArithmeticError):
    """Adaptive quadrature failed to reach the requested tolerance."""

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved error estimate {achieved:.3e})")
        self.achieved = achieved


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances for adaptive quadrature.

    ``singularity_exponent_hint`` is the exponent ``e`` of an endpoint factor
    ``(u - s)^e`` when the caller knows it; it only affects which substitution
    is attempted and may be left at 0.
    """

    abs_tol: float = 1e-13
    rel_tol: float = 1e-11
    max_subdivisions: int = 200
    singularity_exponent_hint: float = 0.0

    def __post_init__(self) -> None:
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


DEFAULT_QUADRATURE = QuadratureConfig()


def adaptive_quad(func, lo: float, hi: float, q: QuadratureConfig, what: str, **kwargs) -> float:
    """``scipy.integrate.quad`` that raises :class:`QuadratureError` instead of warning.

    Convergence is judged against the configured tolerances, not against
    scipy's own flag, so a rule that stops early but already meets the
    tolerance is accepted.
    """
    value, err, info = integrate.quad(
        func,
        lo,
        hi,
        epsabs=q.abs_tol,
        epsrel=q.rel_tol,
        limit=q.max_subdivisions,
        full_output=True,
        **kwargs,
    )[:3]
    allowed = max(q.abs_tol, q.rel_tol * abs(value))
    if not math.isfinite(value) or err > 100 * allowed:
        raise QuadratureError(f"{what} did not converge on [{lo}, {hi}]", err)
    return value


@functools.lru_cache(maxsize=8)
def tanh_sinh_rule(level: int = 6, kmax: float = 4.5):
    """Nodes and weights of the tanh-sinh rule on (0, 1).

    Returns ``(y, ym, w)`` with ``ym = 1 - y`` computed without cancellation,
    so integrands singular at either endpoint can be evaluated accurately.
    Step size is ``2**-level``; nodes with underflowing weight are dropped.
    """
    h = 2.0**-level
    k = np.arange(-int(round(kmax / h)), int(round(kmax / h)) + 1) * h
    v = 0.5 * np.pi * np.sinh(k)
    y = np.exp(-np.logaddexp(0.0, -2.0 * v))
    ym = np.exp(-np.logaddexp(0.0, 2.0 * v))
    with np.errstate(over="ignore"):
        w = h * 0.25 * np.pi * np.cosh(k) / np.cosh(v) ** 2
    keep = (w > 1e-200) & (y > 1e-200) & (ym > 0)
    out = (y[keep], ym[keep], w[keep])
    for arr in out:
        arr.setflags(write=False)
    return out
