"""Hot inner loops, compiled with numba when available.

Every kernel exists twice: a plain numpy version and an ``@njit`` version with
the same signature and the same result (bit-identical for the integer-valued
kernels, equal to rounding for the floating-point ones).  The numba path is the
default; set ``MIXPERSIST_DISABLE_NUMBA=1`` in the environment before import to
force the numpy path, e.g. for debugging or on platforms without LLVM.

``benchmarks/bench_kernels.py`` times both paths against each other.
"""

from __future__ import annotations

import math
import os

import numpy as np

DISABLE_ENV = "MIXPERSIST_DISABLE_NUMBA"

try:  # pragma: no cover - exercised implicitly
    import numba
except ImportError:  # pragma: no cover
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and os.environ.get(DISABLE_ENV, "").strip().lower() not in {
    "1",
    "true",
    "yes",
    "on",
}


# --------------------------------------------------------------------------
# numpy implementations
# --------------------------------------------------------------------------


def _first_exceedance_np(paths, threshold):
    exc = paths > threshold[None, :]
    hit = exc.any(axis=1)
    idx = exc.argmax(axis=1)
    return np.where(hit, idx, paths.shape[1]).astype(np.int64)


def _bridge_log_survival_np(paths, times, level, cuts):
    # log P(continuous Brownian path stays <= level | grid values), nested at cuts
    m, n = paths.shape
    gap = level - paths
    dt = np.diff(times)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        arg = -2.0 * gap[:, :-1] * gap[:, 1:] / dt[None, :]
        step = np.log(-np.expm1(arg))
    step = np.where((gap[:, :-1] > 0) & (gap[:, 1:] > 0), step, -np.inf)
    cum = np.concatenate(
        [np.where(gap[:, :1] >= 0, 0.0, -np.inf), np.cumsum(step, axis=1)], axis=1
    )
    cum[:, 1:] += cum[:, :1]
    out = np.empty((m, len(cuts)))
    for j, c in enumerate(cuts):
        out[:, j] = cum[:, c - 1] if c > 0 else 0.0
    return out


def _cumulative_trapezoid_np(paths, times):
    out = np.zeros_like(paths)
    dt = np.diff(times)
    out[:, 1:] = np.cumsum(0.5 * (paths[:, 1:] + paths[:, :-1]) * dt[None, :], axis=1)
    return out


def _mg_sum_upper_np(c, beta, ratio, y, w):
    # sum_k w_k y_k^beta expm1(c log1p(ratio * y_k)), vectorised over ratio
    out = np.empty(ratio.shape[0])
    yb = w * y**beta
    for start in range(0, ratio.shape[0], 1024):
        r = ratio[start : start + 1024, None]
        out[start : start + 1024] = (yb * np.expm1(c * np.log1p(r * y))).sum(axis=1)
    return out


def _mg_sum_lower_np(c, ratio, y, w):
    # sum_k w_k y_k^c (1 + ratio y_k)^(c - 1)
    out = np.empty(ratio.shape[0])
    yc = w * y**c
    for start in range(0, ratio.shape[0], 1024):
        r = ratio[start : start + 1024, None]
        out[start : start + 1024] = (yc * np.exp((c - 1.0) * np.log1p(r * y))).sum(axis=1)
    return out


# --------------------------------------------------------------------------
# numba implementations
# --------------------------------------------------------------------------

if HAVE_NUMBA:
    _jit = numba.njit(cache=True, nogil=True)

    @_jit
    def _first_exceedance_nb(paths, threshold):
        m, n = paths.shape
        out = np.empty(m, dtype=np.int64)
        for i in range(m):
            k = n
            for j in range(n):
                if paths[i, j] > threshold[j]:
                    k = j
                    break
            out[i] = k
        return out

    @_jit
    def _bridge_log_survival_nb(paths, times, level, cuts):
        m, n = paths.shape
        ncut = cuts.shape[0]
        out = np.empty((m, ncut))
        for i in range(m):
            acc = 0.0 if level - paths[i, 0] >= 0.0 else -np.inf
            c = 0
            while c < ncut and cuts[c] <= 1:
                out[i, c] = acc if cuts[c] == 1 else 0.0
                c += 1
            for j in range(1, n):
                if acc != -np.inf:
                    g0 = level - paths[i, j - 1]
                    g1 = level - paths[i, j]
                    if g0 > 0.0 and g1 > 0.0:
                        acc += math.log(-math.expm1(-2.0 * g0 * g1 / (times[j] - times[j - 1])))
                    else:
                        acc = -np.inf
                while c < ncut and cuts[c] == j + 1:
                    out[i, c] = acc
                    c += 1
            while c < ncut:
                out[i, c] = acc
                c += 1
        return out

    @_jit
    def _cumulative_trapezoid_nb(paths, times):
        m, n = paths.shape
        out = np.zeros_like(paths)
        for i in range(m):
            acc = 0.0
            for j in range(1, n):
                acc += 0.5 * (paths[i, j] + paths[i, j - 1]) * (times[j] - times[j - 1])
                out[i, j] = acc
        return out

    @_jit
    def _mg_sum_upper_nb(c, beta, ratio, y, w):
        out = np.empty(ratio.shape[0])
        yb = np.empty(y.shape[0])
        for k in range(y.shape[0]):
            yb[k] = w[k] * y[k] ** beta
        for i in range(ratio.shape[0]):
            r = ratio[i]
            acc = 0.0
            for k in range(y.shape[0]):
                acc += yb[k] * math.expm1(c * math.log1p(r * y[k]))
            out[i] = acc
        return out

    @_jit
    def _mg_sum_lower_nb(c, ratio, y, w):
        out = np.empty(ratio.shape[0])
        yc = np.empty(y.shape[0])
        for k in range(y.shape[0]):
            yc[k] = w[k] * y[k] ** c
        for i in range(ratio.shape[0]):
            r = ratio[i]
            acc = 0.0
            for k in range(y.shape[0]):
                acc += yc[k] * math.exp((c - 1.0) * math.log1p(r * y[k]))
            out[i] = acc
        return out


NUMPY_KERNELS = {
    "first_exceedance": _first_exceedance_np,
    "bridge_log_survival": _bridge_log_survival_np,
    "cumulative_trapezoid": _cumulative_trapezoid_np,
    "mg_sum_upper": _mg_sum_upper_np,
    "mg_sum_lower": _mg_sum_lower_np,
}

NUMBA_KERNELS = (
    {
        "first_exceedance": _first_exceedance_nb,
        "bridge_log_survival": _bridge_log_survival_nb,
        "cumulative_trapezoid": _cumulative_trapezoid_nb,
        "mg_sum_upper": _mg_sum_upper_nb,
        "mg_sum_lower": _mg_sum_lower_nb,
    }
    if HAVE_NUMBA
    else {}
)

BACKEND = "numba" if USE_NUMBA else "numpy"
# the MG sums are dominated by exp/log1p, which numpy evaluates with SIMD
# and numba (without SVML) does not; the numpy versions measured 2-3x faster
_ACTIVE = (
    dict(NUMBA_KERNELS, mg_sum_upper=_mg_sum_upper_np, mg_sum_lower=_mg_sum_lower_np)
    if USE_NUMBA
    else NUMPY_KERNELS
)


def kernels(backend: str | None = None) -> dict:
    """Kernel table for ``backend`` ("numba" or "numpy"); default is the active one."""
    if backend is None:
        return _ACTIVE
    if backend == "numpy":
        return NUMPY_KERNELS
    if backend == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba is not installed")
        return NUMBA_KERNELS
    raise ValueError(f"unknown kernel backend {backend!r}")


def first_exceedance(paths: np.ndarray, threshold: np.ndarray) -> np.ndarray:
    """Index of the first column where ``paths[i, j] > threshold[j]``; ``n`` if none."""
    paths = np.ascontiguousarray(paths, dtype=np.float64)
    threshold = np.ascontiguousarray(threshold, dtype=np.float64)
    return _ACTIVE["first_exceedance"](paths, threshold)


def bridge_log_survival(
    paths: np.ndarray, times: np.ndarray, level: float, cuts: np.ndarray
) -> np.ndarray:
    """Log of the Brownian-bridge probability that each path stays below ``level``.

    Between consecutive grid points the path is treated as a Brownian bridge
    with unit diffusion, so the conditional non-crossing probability of one
    step is ``1 - exp(-2 g0 g1 / dt)``.  Column ``j`` of the result covers the
    first ``cuts[j]`` grid points (``cuts`` non-decreasing).
    """
    paths = np.ascontiguousarray(paths, dtype=np.float64)
    times = np.ascontiguousarray(times, dtype=np.float64)
    cuts = np.ascontiguousarray(cuts, dtype=np.int64)
    return _ACTIVE["bridge_log_survival"](paths, times, float(level), cuts)


def cumulative_trapezoid(paths: np.ndarray, times: np.ndarray) -> np.ndarray:
    paths = np.ascontiguousarray(paths, dtype=np.float64)
    times = np.ascontiguousarray(times, dtype=np.float64)
    return _ACTIVE["cumulative_trapezoid"](paths, times)


def mg_sum_upper(c, beta, ratio, y, w):
    return _ACTIVE["mg_sum_upper"](
        float(c), float(beta), np.ascontiguousarray(ratio, dtype=np.float64), y, w
    )


def mg_sum_lower(c, ratio, y, w):
    return _ACTIVE["mg_sum_lower"](float(c), np.ascontiguousarray(ratio, dtype=np.float64), y, w)
