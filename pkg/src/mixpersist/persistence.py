"""Monte Carlo persistence probabilities, exceedance probabilities and exponent fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import _accel
from .covariance import variance
from .processes import ProcessSpec, TimeGrid
from .sampling import SeedPolicy, iter_blocks

Z95 = 1.959963984540054


class EstimationError(ValueError):
    """Invalid query or not enough usable estimates for a fit."""


@dataclass(frozen=True)
class GridPolicy:
    """Template that builds a :class:`TimeGrid` once the horizon is known."""

    kind: str = "lamperti"
    n: int = 4096
    t_min: float = 1e-3
    include_origin: bool = True

    def __post_init__(self) -> None:
        if self.kind not in ("lamperti", "uniform"):
            raise EstimationError(f"unknown grid policy {self.kind!r}")
        if self.n < 2:
            raise EstimationError("grid needs at least 2 points")

    def build(self, t_max: float) -> TimeGrid:
        if self.kind == "uniform":
            return TimeGrid.uniform(t_max, self.n, self.include_origin)
        return TimeGrid.lamperti(self.t_min, t_max, self.n, self.include_origin)


@dataclass(frozen=True)
class PersistenceQuery:
    """What to estimate: ``P(sup_{t <= T} X_t + sign * h(t) <= level)`` for each ``T``.

    ``drift`` is any callable ``h(t)`` (typically a
    :class:`~mixpersist.spectral.DriftEnvelope`); ``drift_sign`` selects
    ``+h`` or ``-h``.  ``continuity="bridge"`` replaces the grid indicator by
    the exact conditional probability that a Brownian path stays below the
    level between grid points (Brownian motion without drift only).
    """

    spec: ProcessSpec
    ladder: tuple
    n_paths: int
    seed: SeedPolicy
    level: float = 1.0
    grid_policy: GridPolicy = GridPolicy()
    drift: object = None
    drift_sign: int = 1
    backend: str = "auto"
    continuity: str = "grid"

    def __post_init__(self) -> None:
        ladder = tuple(float(T) for T in self.ladder)
        object.__setattr__(self, "ladder", ladder)
        if not ladder or any(b <= a for a, b in zip(ladder, ladder[1:])) or ladder[0] <= 0:
            raise EstimationError("ladder must be positive and strictly increasing")
        if self.n_paths < 100:
            raise EstimationError("need at least 100 paths")
        if not math.isfinite(self.level):
            raise EstimationError("level must be finite")
        if self.drift_sign not in (-1, 1):
            raise EstimationError("drift_sign must be +1 or -1")
        if self.continuity not in ("grid", "bridge"):
            raise EstimationError(f"unknown continuity mode {self.continuity!r}")
        if self.continuity == "bridge" and (self.spec.kind != "bm" or self.drift is not None):
            raise EstimationError("bridge correction applies to driftless Brownian motion only")

    def grid(self) -> TimeGrid:
        return self.grid_policy.build(self.ladder[-1])

    def threshold(self, times: np.ndarray) -> np.ndarray:
        thr = np.full(times.shape, float(self.level))
        if self.drift is not None:
            thr -= self.drift_sign * np.asarray(self.drift(times), dtype=np.float64)
        return thr


@dataclass(frozen=True)
class PersistenceEstimate:
    """Estimate of the persistence probability at one horizon ``T``."""

    T: float
    p_hat: float
    ci_low: float
    ci_high: float
    n_paths: int
    grid_points_used: int
    stderr: float = float("nan")
    zero_count: bool = False


@dataclass(frozen=True)
class ExponentFit:
    """Weighted log-log fit ``log p = intercept - theta log T``."""

    theta_hat: float
    stderr: float
    intercept: float
    r_squared: float
    T_min: float
    T_max: float
    burn_in: int
    n_points: int

    @property
    def T_range_used(self) -> tuple:
        return (self.T_min, self.T_max)


def wilson_interval(successes: int, n: int, z: float = Z95) -> tuple:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        return (0.0, 1.0)
    p = successes / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == n else min(1.0, centre + half)
    return (min(lo, p), max(hi, p))


def closed_form_bm_persistence(T, level: float = 1.0):
    """``P(sup_{[0,T]} W <= level) = 2 Phi(level / sqrt(T)) - 1`` (0 for ``level <= 0``)."""
    T = np.asarray(T, dtype=np.float64)
    if np.any(T <= 0):
        raise EstimationError("T must be positive")
    if level <= 0:
        out = np.zeros(T.shape)
    else:
        out = np.clip(special.erf(level / np.sqrt(2.0 * T)), 0.0, 1.0)
    return out[()] if out.ndim == 0 else out


def _cuts(grid: TimeGrid, ladder) -> np.ndarray:
    # number of grid points with t <= T, for each T
    return np.searchsorted(grid.times, np.asarray(ladder) * (1 + 1e-12), side="right")


def estimate_persistence(q: PersistenceQuery, threads: int | None = None) -> list:
    """Estimate the persistence probability at every ladder horizon from one set of paths.

    Paths are simulated once up to the largest horizon; smaller horizons reuse
    their prefixes, so the estimates are non-increasing in ``T``.  Each path is
    reduced to the index of its first exceedance (an integer), which makes the
    result independent of batching and thread count.
    """
    grid = q.grid()
    times = grid.times
    cuts = _cuts(grid, q.ladder)
    n = q.n_paths
    if q.continuity == "bridge":
        logs = np.empty((n, cuts.size))
        for offset, vals in iter_blocks(q.spec, grid, n, q.seed, q.backend, threads):
            logs[offset : offset + vals.shape[0]] = _accel.bridge_log_survival(
                vals, times, q.level, cuts
            )
        probs = np.exp(logs)
        out = []
        for j, T in enumerate(q.ladder):
            col = probs[:, j]
            p = math.fsum(col) / n
            se = float(np.std(col, ddof=1)) / math.sqrt(n)
            out.append(
                PersistenceEstimate(
                    T, p, max(0.0, p - Z95 * se), min(1.0, p + Z95 * se), n, int(cuts[j]), se, p == 0
                )
            )
        return out

    threshold = q.threshold(times)
    first = np.empty(n, dtype=np.int64)
    for offset, vals in iter_blocks(q.spec, grid, n, q.seed, q.backend, threads):
        first[offset : offset + vals.shape[0]] = _accel.first_exceedance(vals, threshold)
    out = []
    for j, T in enumerate(q.ladder):
        k = int(np.count_nonzero(first >= cuts[j]))
        p = k / n
        lo, hi = wilson_interval(k, n)
        out.append(
            PersistenceEstimate(
                T, p, lo, hi, n, int(cuts[j]), math.sqrt(p * (1 - p) / n), k == 0
            )
        )
    return out


def fit_exponent(estimates, burn_in: int = 2, min_points: int = 4) -> ExponentFit:
    """Weighted least squares of ``log p_hat`` on ``log T``.

    The ``burn_in`` smallest horizons are dropped; estimates with
    ``p_hat`` equal to 0 or 1 are excluded.  Weights are inverse delta-method
    variances ``p^2 / se^2`` (``n p / (1 - p)`` for binomial estimates).  The
    standard error treats these variances as known.
    """
    ests = sorted(estimates, key=lambda e: e.T)[burn_in:]
    use = [e for e in ests if 0 < e.p_hat < 1]
    if len(use) < min_points:
        raise EstimationError(
            f"need at least {min_points} usable estimates after burn-in, have {len(use)}"
        )
    x = np.log([e.T for e in use])
    y = np.log([e.p_hat for e in use])
    w = np.empty(len(use))
    for i, e in enumerate(use):
        se = e.stderr
        if not (se > 0 and math.isfinite(se)):
            se = math.sqrt(e.p_hat * (1 - e.p_hat) / e.n_paths)
        w[i] = (e.p_hat / se) ** 2
    A = np.column_stack([np.ones_like(x), x])
    normal = A.T @ (w[:, None] * A)
    cov = np.linalg.inv(normal)
    beta = cov @ (A.T @ (w * y))
    resid = y - A @ beta
    ybar = np.sum(w * y) / np.sum(w)
    ss_tot = float(np.sum(w * (y - ybar) ** 2))
    ss_res = float(np.sum(w * resid**2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return ExponentFit(
        theta_hat=float(-beta[1]),
        stderr=float(math.sqrt(cov[1, 1])),
        intercept=float(beta[0]),
        r_squared=float(r2),
        T_min=float(use[0].T),
        T_max=float(use[-1].T),
        burn_in=burn_in,
        n_points=len(use),
    )


@dataclass(frozen=True)
class ExponentGap:
    """``theta(mixed) - theta(dominant)`` with both fits and estimate ladders."""

    gap: float
    mixed: ExponentFit
    dominant: ExponentFit
    mixed_estimates: list = field(repr=False)
    dominant_estimates: list = field(repr=False)

    def __float__(self) -> float:
        return self.gap


def paired_exponent_gap(
    spec_mixed: ProcessSpec,
    spec_dominant: ProcessSpec,
    shared: PersistenceQuery,
    burn_in: int = 2,
    threads: int | None = None,
) -> ExponentGap:
    """Fit both specs with the same ladder, grid, path count and seed.

    Common random numbers come for free: an independent mixture draws its
    dominant component from stream 0, which is the stream the pure dominant
    process uses.
    """
    from dataclasses import replace

    em = estimate_persistence(replace(shared, spec=spec_mixed), threads)
    ed = em if spec_mixed == spec_dominant else estimate_persistence(
        replace(shared, spec=spec_dominant), threads
    )
    fm = fit_exponent(em, burn_in)
    fd = fit_exponent(ed, burn_in)
    return ExponentGap(fm.theta_hat - fd.theta_hat, fm, fd, em, ed)


@dataclass(frozen=True)
class GridExtrapolation:
    """Exponent fits on refined grids and their limit as the grid step goes to 0."""

    theta_hat: float
    stderr: float
    rate: float
    grid_sizes: tuple
    fits: tuple


def richardson_limit(values, steps, rate: float, stderrs=None) -> tuple:
    """Intercept of ``value = limit + c * step**rate`` by weighted least squares.

    With two points this is plain Richardson extrapolation.  Returns
    ``(limit, stderr)``; the values are treated as independent, and the
    stderr is ``nan`` when ``stderrs`` is not given.
    """
    v = np.asarray(values, dtype=np.float64)
    x = np.asarray(steps, dtype=np.float64) ** rate
    if v.size < 2 or v.size != x.size:
        raise EstimationError("need at least two values with matching steps")
    se = np.ones_like(v) if stderrs is None else np.asarray(stderrs, dtype=np.float64)
    w = 1.0 / se**2
    A = np.column_stack([np.ones_like(x), x])
    cov = np.linalg.inv(A.T @ (w[:, None] * A))
    beta = cov @ (A.T @ (w * v))
    return float(beta[0]), (float(math.sqrt(cov[0, 0])) if stderrs is not None else math.nan)


def grid_extrapolated_exponent(
    q: PersistenceQuery,
    refinements=(1, 4, 16),
    burn_in: int = 2,
    rate: float | None = None,
    threads: int | None = None,
) -> GridExtrapolation:
    """Fit the exponent on grids of ``q.grid_policy.n * r`` points and extrapolate.

    A discretely monitored supremum misses crossings between grid points, so
    persistence is overestimated and the fitted exponent is biased low.  On a
    log-uniform grid with relative step ``delta`` the bias scales like
    ``delta**rate`` with ``rate`` the Hoelder index of the paths (``H`` for
    FBM), which is what :func:`richardson_limit` removes.  ``rate`` must be
    given for kinds other than FBM and Brownian motion.
    """
    from dataclasses import replace

    if rate is None:
        if q.spec.kind not in ("fbm", "bm"):
            raise EstimationError(f"give the bias rate for {q.spec.kind!r} explicitly")
        rate = q.spec.H
    sizes = tuple(int(q.grid_policy.n * r) for r in refinements)
    fits = tuple(
        fit_exponent(estimate_persistence(replace(q, grid_policy=replace(q.grid_policy, n=n)), threads), burn_in)
        for n in sizes
    )
    theta, se = richardson_limit(
        [f.theta_hat for f in fits], [sizes[0] / n for n in sizes], rate, [f.stderr for f in fits]
    )
    return GridExtrapolation(theta, se, float(rate), sizes, fits)


def exceedance_grid(A: float, T: float, n: int = 1024) -> TimeGrid:
    """Log-uniform grid on ``[A, T]``; a single point when ``A == T``."""
    if A == T:
        return TimeGrid.explicit([T], include_origin=False)
    return TimeGrid.lamperti(A, T, n, include_origin=False)


def exceedance_union_bound(spec: ProcessSpec, gamma: float, times) -> float:
    """``sum_t 2 Phi(-t^gamma / sigma(t))`` over the grid, an upper bound for the exceedance."""
    t = np.asarray(times, dtype=np.float64)
    sd = np.sqrt(variance(spec, t))
    return float(np.sum(special.erfc(t**gamma / sd / math.sqrt(2.0))))


def exceedance_probability(
    specY: ProcessSpec,
    gamma: float,
    A: float,
    T: float,
    n_paths: int,
    seed: SeedPolicy,
    n_grid: int = 1024,
    backend: str = "auto",
    threads: int | None = None,
) -> PersistenceEstimate:
    """Monte Carlo ``P(exists t in [A, T] on the grid: |Y_t| > t^gamma)``.

    Requires ``gamma`` above the self-similarity index of ``specY``.
    """
    if not gamma > specY.index:
        raise EstimationError(f"need gamma > index {specY.index}, got {gamma}")
    if not 0 < A <= T:
        raise EstimationError("need 0 < A <= T")
    grid = exceedance_grid(A, T, n_grid)
    bound = grid.times**gamma
    hits = 0
    for _, vals in iter_blocks(specY, grid, n_paths, seed, backend, threads):
        hits += int(np.count_nonzero(np.any(np.abs(vals) > bound, axis=1)))
    p = hits / n_paths
    lo, hi = wilson_interval(hits, n_paths)
    return PersistenceEstimate(
        T, p, lo, hi, n_paths, grid.times.size, math.sqrt(p * (1 - p) / n_paths), hits == 0
    )
