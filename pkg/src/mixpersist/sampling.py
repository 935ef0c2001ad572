"""Exact Gaussian path sampling with reproducible counter-based randomness.

Randomness
----------
Replicate ``i`` of component stream ``c`` draws its normals from a Philox
generator keyed by ``(master_seed, experiment_id)`` with counter
``[0, i, c, 0]``.  A replicate's path therefore depends only on those four
numbers, never on how replicates are split into batches or threads.

Work is done in canonical blocks of :data:`BLOCK` replicates aligned at
multiples of :data:`BLOCK`.  Any request is served by computing the covering
blocks and slicing, so even BLAS/FFT kernels see identical inputs regardless
of the requested range, and outputs are bitwise reproducible.

Backends
--------
``lamperti``
    Log-uniform grids and self-similar processes (and independent sums of
    them).  ``t^-d X_t`` is stationary in ``log t``; it is sampled exactly by
    circulant embedding of its autocovariance.
``circulant``
    Uniform grids and FBM: cumulative sums of fractional Gaussian noise.
``increments``
    Brownian motion on any grid: cumulative independent increments.
``cholesky``
    Any process on any grid, via the certified covariance factor.
"""

from __future__ import annotations

import functools
import hashlib
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import _accel
from .covariance import CovarianceMatrix, cov_matrix, lamperti_autocov
from .processes import ProcessSpec, TimeGrid

BLOCK = 256
THREADS_ENV = "MIXPERSIST_THREADS"
EIGEN_TOLERANCE = 1e-12


class BackendError(ValueError):
    """Requested backend cannot sample this process on this grid."""


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return 1


def experiment_key(name: str) -> int:
    """Stable 64-bit identifier for an experiment name."""
    return int.from_bytes(hashlib.blake2b(name.encode(), digest_size=8).digest(), "little")


@dataclass(frozen=True)
class SeedPolicy:
    """Seed of a batch: replicate ``first_replicate + k`` is row ``k``."""

    master_seed: int
    experiment_id: int = 0
    first_replicate: int = 0

    def __post_init__(self) -> None:
        for name in ("master_seed", "experiment_id", "first_replicate"):
            v = getattr(self, name)
            if not 0 <= int(v) < 2**64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer")
            object.__setattr__(self, name, int(v))

    def generator(self, replicate: int, stream: int = 0) -> np.random.Generator:
        """Generator for absolute replicate index ``replicate`` and component ``stream``."""
        bits = np.random.Philox(
            key=np.array([self.master_seed, self.experiment_id], dtype=np.uint64),
            counter=np.array([0, replicate, stream, 0], dtype=np.uint64),
        )
        return np.random.Generator(bits)

    def normals(self, start: int, count: int, width: int, stream: int = 0) -> np.ndarray:
        """Standard normals for replicates ``start .. start+count-1`` (absolute)."""
        out = np.empty((count, width))
        for k in range(count):
            self.generator(start + k, stream).standard_normal(out=out[k])
        return out

    def shifted(self, offset: int) -> "SeedPolicy":
        return replace(self, first_replicate=self.first_replicate + offset)


@dataclass
class PathBatch:
    """Replicate-major sampled paths, ``values[k]`` is replicate ``seed.first_replicate + k``."""

    spec: ProcessSpec
    grid: TimeGrid
    values: np.ndarray = field(repr=False)
    seed: SeedPolicy
    backend: str = "cholesky"
    fallback: str | None = None

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]


# ---------------------------------------------------------------------------
# per-backend block samplers; each returns f(seed, start, count) -> (count, n)
# over the positive times of the grid
# ---------------------------------------------------------------------------


def _circulant_sqrt(acov_fn, n: int, multipliers=(1, 2)):
    """Square-root eigenvalues of the smallest acceptable circulant embedding.

    ``acov_fn(m)`` must return the autocovariance at lags ``0..m``.  Returns
    ``(sqrt_eigs, M, m)`` or ``None`` when every embedding has eigenvalues
    below ``-EIGEN_TOLERANCE * max``.
    """
    for mult in multipliers:
        m = max(1, n * mult)
        r = acov_fn(m)
        row = np.concatenate([r, r[-2:0:-1]])
        lam = np.fft.rfft(row).real
        if lam.min() >= -EIGEN_TOLERANCE * lam.max():
            return np.sqrt(np.clip(lam, 0.0, None)), row.size, m
    return None


def _circulant_draw(sqrt_eigs: np.ndarray, M: int, n: int, z: np.ndarray) -> np.ndarray:
    # Hermitian complex normal vector built from M real normals per row
    half = M // 2
    xi = np.empty((z.shape[0], half + 1), dtype=np.complex128)
    xi[:, 0] = z[:, 0]
    xi[:, half] = z[:, 1]
    k = half - 1
    xi[:, 1:half].real = z[:, 2 : 2 + k]
    xi[:, 1:half].imag = z[:, 2 + k : 2 + 2 * k]
    xi[:, 1:half] *= math.sqrt(0.5)
    return np.fft.irfft(sqrt_eigs * xi, n=M, axis=1)[:, :n] * math.sqrt(M)


@functools.lru_cache(maxsize=16)
def _lamperti_plan(spec: ProcessSpec, grid: TimeGrid):
    n = grid.n
    delta = grid.log_step
    plan = _circulant_sqrt(
        lambda m: lamperti_autocov(spec, np.arange(m + 1) * delta), n, (1, 2, 3, 4, 6, 8)
    )
    return plan


def _lamperti_sampler(spec: ProcessSpec, grid: TimeGrid, stream: int):
    plan = _lamperti_plan(spec, grid)
    if plan is None:
        return None
    sq, M, _ = plan
    n = grid.n
    scale = grid.positive_times**spec.index

    def draw(seed: SeedPolicy, start: int, count: int) -> np.ndarray:
        z = seed.normals(start, count, M, stream)
        return _circulant_draw(sq, M, n, z) * scale

    return draw


def fgn_autocov(H: float, lags, dt: float = 1.0) -> np.ndarray:
    """Autocovariance ``1/2 (|k+1|^2H + |k-1|^2H - 2|k|^2H) dt^2H`` of fractional Gaussian noise."""
    k = np.abs(np.asarray(lags, dtype=np.float64))
    p = 2.0 * H
    return 0.5 * (np.abs(k + 1) ** p + np.abs(k - 1) ** p - 2.0 * k**p) * dt**p


@functools.lru_cache(maxsize=16)
def _fgn_plan(H: float, n: int):
    return _circulant_sqrt(lambda m: fgn_autocov(H, np.arange(m + 1)), n, (1, 2))


def _fgn_sampler(H: float, grid: TimeGrid, stream: int):
    n = grid.n
    plan = _fgn_plan(H, n)
    if plan is None:
        return None
    sq, M, _ = plan
    scale = grid.step**H

    def draw(seed: SeedPolicy, start: int, count: int) -> np.ndarray:
        z = seed.normals(start, count, M, stream)
        return np.cumsum(_circulant_draw(sq, M, n, z), axis=1) * scale

    return draw


def _increment_sampler(grid: TimeGrid, stream: int):
    t = grid.positive_times
    sd = np.sqrt(np.diff(np.concatenate([[0.0], t])))

    def draw(seed: SeedPolicy, start: int, count: int) -> np.ndarray:
        return np.cumsum(seed.normals(start, count, t.size, stream) * sd, axis=1)

    return draw


def _cholesky_sampler(cov: CovarianceMatrix, stream: int):
    L = cov.factor
    n = L.shape[0]

    def draw(seed: SeedPolicy, start: int, count: int) -> np.ndarray:
        return seed.normals(start, count, n, stream) @ L.T

    return draw


@functools.lru_cache(maxsize=8)
def _cached_cov(spec: ProcessSpec, grid: TimeGrid) -> CovarianceMatrix:
    return cov_matrix(spec, grid)


def _pure_sampler(spec: ProcessSpec, grid: TimeGrid, backend: str, stream: int):
    """Return ``(draw, backend_used, fallback_note)`` for a pure process."""
    fbm_like = spec.kind in ("fbm", "bm")
    if backend == "auto":
        if spec.kind == "bm":
            backend = "increments"
        elif grid.policy == "lamperti":
            backend = "lamperti"
        elif grid.policy == "uniform" and fbm_like:
            backend = "circulant"
        else:
            backend = "cholesky"
    if backend == "increments":
        if spec.kind != "bm":
            raise BackendError("increments backend samples Brownian motion only")
        return _increment_sampler(grid, stream), "increments", None
    if backend == "lamperti":
        if grid.policy != "lamperti":
            raise BackendError("lamperti backend needs a log-uniform grid")
        draw = _lamperti_sampler(spec, grid, stream)
        if draw is not None:
            return draw, "lamperti", None
        note = "lamperti embedding not nonnegative; used cholesky"
    elif backend == "circulant":
        if grid.policy != "uniform" or not fbm_like:
            raise BackendError("circulant backend needs FBM on a uniform grid")
        draw = _fgn_sampler(spec.H, grid, stream)
        if draw is not None:
            return draw, "circulant", None
        note = "fGn embedding not nonnegative after doubling; used cholesky"
    elif backend == "cholesky":
        note = None
    else:
        raise BackendError(f"unknown backend {backend!r}")
    return _cholesky_sampler(_cached_cov(spec, grid), stream), "cholesky", note


def _block_sampler(spec: ProcessSpec, grid: TimeGrid, backend: str):
    """Compose the block sampler for any spec; returns ``(draw, backend_used, note)``."""
    if backend not in ("auto", "cholesky", "circulant", "lamperti", "increments"):
        raise BackendError(f"unknown backend {backend!r}")
    if spec.is_pure:
        return _pure_sampler(spec, grid, backend, 0)
    if spec.kind in ("ccm", "iccm"):
        if backend not in ("auto", "cholesky"):
            raise BackendError("correlated mixtures are sampled as one Gaussian vector (cholesky)")
        return _cholesky_sampler(_cached_cov(spec, grid), 0), "cholesky", None
    if backend == "cholesky":
        return _cholesky_sampler(_cached_cov(spec, grid), 0), "cholesky", None
    parts = []
    notes = []
    used = set()
    for stream, (weight, comp) in enumerate(spec.components()):
        comp_backend = backend
        if backend == "circulant" and comp.kind not in ("fbm", "bm"):
            raise BackendError("circulant backend needs FBM components")
        draw, b, note = _pure_sampler(comp, grid, comp_backend, stream)
        parts.append((weight, draw))
        used.add(b)
        if note:
            notes.append(note)

    def draw(seed: SeedPolicy, start: int, count: int) -> np.ndarray:
        out = parts[0][0] * parts[0][1](seed, start, count)
        for weight, f in parts[1:]:
            out += weight * f(seed, start, count)
        return out

    return draw, "+".join(sorted(used)), "; ".join(notes) or None


def iter_blocks(
    spec: ProcessSpec,
    grid: TimeGrid,
    n_paths: int,
    seed: SeedPolicy,
    backend: str = "auto",
    threads: int | None = None,
):
    """Yield ``(offset, values)`` chunks covering ``n_paths`` replicates in order.

    ``values`` has one column per grid time (origin column included when the
    grid has one).  Chunk boundaries depend on ``threads`` but the values of
    each replicate do not.
    """
    draw, _, _ = _block_sampler(spec, grid, backend)
    yield from _iter_with(draw, grid, n_paths, seed, threads)


def _iter_with(draw, grid, n_paths, seed, threads):
    threads = default_threads() if threads is None else max(1, int(threads))
    first = seed.first_replicate
    last = first + n_paths
    blocks = list(range(first // BLOCK, -(-last // BLOCK)))
    pad = 1 if grid.includes_origin else 0

    def run(b):
        start = b * BLOCK
        vals = draw(seed, start, BLOCK)
        lo = max(first, start) - start
        hi = min(last, start + BLOCK) - start
        vals = vals[lo:hi]
        if pad:
            vals = np.concatenate([np.zeros((vals.shape[0], 1)), vals], axis=1)
        return max(first, start) - first, vals

    if threads == 1:
        for b in blocks:
            yield run(b)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for i in range(0, len(blocks), threads):
            yield from pool.map(run, blocks[i : i + threads])


def _collect(spec, grid, n_paths, seed, draw, backend, note, threads) -> PathBatch:
    width = grid.times.size
    values = np.empty((n_paths, width))
    for offset, vals in _iter_with(draw, grid, n_paths, seed, threads):
        values[offset : offset + vals.shape[0]] = vals
    return PathBatch(spec, grid, values, seed, backend, note)


def sample_process(
    spec: ProcessSpec,
    grid: TimeGrid,
    n_paths: int,
    seed: SeedPolicy,
    backend: str = "auto",
    threads: int | None = None,
) -> PathBatch:
    """Sample ``n_paths`` exact paths of ``spec`` on ``grid``.

    Parameters
    ----------
    backend : {"auto", "cholesky", "circulant", "lamperti", "increments"}
        ``auto`` picks the cheapest exact method.  Independent mixtures are
        sampled component-wise with component ``c`` on stream ``c`` (the
        dominant component is stream 0, the same stream a pure sample of it
        uses).  Correlated mixtures are one Gaussian vector from their joint
        covariance.
    """
    if n_paths < 0:
        raise ValueError("n_paths must be non-negative")
    draw, used, note = _block_sampler(spec, grid, backend)
    return _collect(spec, grid, n_paths, seed, draw, used, note, threads)


def cholesky_sample(
    cov: CovarianceMatrix, n_paths: int, seed: SeedPolicy, threads: int | None = None
) -> PathBatch:
    """Rows ``L z`` with ``L`` the certified factor of ``cov``."""
    draw = _cholesky_sampler(cov, 0)
    return _collect(cov.spec, cov.grid, n_paths, seed, draw, "cholesky", None, threads)


def fgn_circulant_sample(
    H: float, n_steps: int, dt: float, n_paths: int, seed: SeedPolicy, threads: int | None = None
) -> PathBatch:
    """FBM on ``0, dt, ..., n_steps dt`` as cumulative fractional Gaussian noise.

    Circulant embedding of size ``2 n_steps``, doubled once if any eigenvalue
    is below ``-1e-12 * max``; failing that, Cholesky with ``fallback`` set.
    """
    if not 0 < H < 1 or n_steps < 1 or not dt > 0:
        raise ValueError("need H in (0, 1), n_steps >= 1 and dt > 0")
    spec = ProcessSpec.brownian() if H == 0.5 else ProcessSpec.fbm(H)
    grid = TimeGrid.uniform(n_steps * dt, n_steps)
    draw, used, note = _pure_sampler(spec, grid, "circulant", 0)
    return _collect(spec, grid, n_paths, seed, draw, used, note, threads)


def integrate_paths(batch: PathBatch) -> PathBatch:
    """Row-wise cumulative trapezoid ``sum_{i<k} (x_i + x_{i+1}) (t_{i+1} - t_i) / 2``."""
    if not batch.grid.includes_origin:
        raise ValueError("integration needs a grid that includes the origin")
    vals = _accel.cumulative_trapezoid(batch.values, batch.grid.times)
    return PathBatch(batch.spec, batch.grid, vals, batch.seed, batch.backend + "+trapezoid", batch.fallback)
