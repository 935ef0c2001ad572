import numpy as np
import pytest

from mixpersist.covariance import cov_matrix
from mixpersist.persistence import GridPolicy, PersistenceQuery, estimate_persistence
from mixpersist.processes import ProcessSpec, TimeGrid
from mixpersist.sampling import (
    BackendError,
    SeedPolicy,
    cholesky_sample,
    experiment_key,
    fgn_autocov,
    fgn_circulant_sample,
    integrate_paths,
    iter_blocks,
    sample_process,
)

SEED = SeedPolicy(20240607, experiment_key("sampler-tests"))

MOMENT_SPECS = [
    ProcessSpec.fbm(0.25),
    ProcessSpec.fbm(0.75),
    ProcessSpec.riemann_liouville(0.8),
    ProcessSpec.mixed_independent(1, 0.75, 1, 0.5),
    ProcessSpec.mixed_correlated(1, 0.7, 1, 0.5),
]


def empirical_z(values, cov):
    """Entrywise (empirical - analytic) / SE, with the 4th-moment SE of a product mean."""
    n = values.shape[0]
    prod = values[:, :, None] * values[:, None, :]
    mean = prod.mean(axis=0)
    se = np.sqrt((prod**2).mean(axis=0) - mean**2) / np.sqrt(n)
    return (mean - cov) / se


def test_fgn_autocov_lag_one():
    assert fgn_autocov(0.75, 1) == pytest.approx(0.41421356237309515, rel=1e-14)
    assert fgn_autocov(0.5, [1, 2, 3]).tolist() == [0.0, 0.0, 0.0]


def test_seed_policy_bounds():
    with pytest.raises(ValueError):
        SeedPolicy(-1)
    with pytest.raises(ValueError):
        SeedPolicy(1, 2**64)


def test_determinism_same_seed_twice():
    grid = TimeGrid.explicit([1.0, 2.0, 4.0])
    a = sample_process(ProcessSpec.fbm(0.75), grid, 50, SEED)
    b = sample_process(ProcessSpec.fbm(0.75), grid, 50, SEED)
    assert a.values.tobytes() == b.values.tobytes()


@pytest.mark.parametrize(
    "spec",
    [ProcessSpec.fbm(0.3), ProcessSpec.brownian(), ProcessSpec.mixed_independent(1, 0.75, 1, 0.5)],
    ids=str,
)
def test_determinism_across_threads_and_partitions(spec):
    grid = TimeGrid.lamperti(1e-2, 10.0, 32)
    full = sample_process(spec, grid, 700, SEED, threads=1).values
    threaded = sample_process(spec, grid, 700, SEED, threads=3).values
    assert full.tobytes() == threaded.tobytes()
    # a batch starting mid-block reproduces the corresponding rows
    part = sample_process(spec, grid, 300, SEED.shifted(301), threads=2).values
    assert part.tobytes() == full[301:601].tobytes()
    pieces = np.concatenate([v for _, v in iter_blocks(spec, grid, 700, SEED, threads=2)])
    assert pieces.tobytes() == full.tobytes()


def test_origin_column_is_zero():
    batch = sample_process(ProcessSpec.fbm(0.75), TimeGrid.uniform(1.0, 16), 10, SEED)
    assert batch.values.shape == (10, 17)
    assert not batch.values[:, 0].any()


def test_independent_mixture_shares_dominant_stream():
    # dominant component on stream 0 (the stream a pure sample uses), BM on stream 1
    grid = TimeGrid.lamperti(1e-2, 10.0, 16, include_origin=False)
    mix = sample_process(ProcessSpec.mixed_independent(1, 0.75, 1, 0.5), grid, 64, SEED).values
    dom = sample_process(ProcessSpec.fbm(0.75), grid, 64, SEED).values
    sd = np.sqrt(np.diff(np.concatenate([[0.0], grid.times])))
    bm_stream1 = np.cumsum(SEED.normals(0, 64, 16, stream=1) * sd, axis=1)
    np.testing.assert_allclose(mix - dom, bm_stream1, rtol=0, atol=1e-12)


@pytest.mark.parametrize("spec", MOMENT_SPECS, ids=str)
def test_moment_matching_8_point_grid(spec):
    grid = TimeGrid.lamperti(0.1, 10.0, 8, include_origin=False)
    batch = sample_process(spec, grid, 100_000, SEED)
    cov = cov_matrix(spec, grid).entries
    z = empirical_z(batch.values, cov)
    assert np.max(np.abs(z)) <= 3.0, np.round(z, 2)


@pytest.mark.parametrize("backend", ["cholesky", "circulant"])
def test_uniform_grid_moments_per_backend(backend):
    spec = ProcessSpec.fbm(0.3)
    grid = TimeGrid.uniform(4.0, 8, include_origin=False)
    batch = sample_process(spec, grid, 50_000, SEED, backend=backend)
    z = empirical_z(batch.values, cov_matrix(spec, grid).entries)
    assert np.max(np.abs(z)) <= 3.5


def test_backend_equivalence_persistence():
    spec = ProcessSpec.fbm(0.7)
    ests = {}
    for backend in ("circulant", "cholesky"):
        q = PersistenceQuery(spec, (4.0, 16.0, 64.0), 40_000, SEED, 1.0, GridPolicy("uniform", 256), backend=backend)
        ests[backend] = estimate_persistence(q)
    for a, b in zip(ests["circulant"], ests["cholesky"]):
        assert abs(a.p_hat - b.p_hat) <= 3 * np.hypot(a.stderr, b.stderr)


def test_stationary_increments_fbm():
    # every increment over lag delta has the variance of B_delta; pool all
    # start positions per lag and take the SE from per-path averages
    H, dt = 0.75, 0.25
    v = fgn_circulant_sample(H, 64, dt, 40_000, SEED).values
    for lag in (1, 4, 16):
        inc = v[:, lag:] - v[:, :-lag]
        per_path = np.mean(inc**2, axis=1)
        se = np.std(per_path, ddof=1) / np.sqrt(per_path.size)
        assert abs(per_path.mean() - (lag * dt) ** (2 * H)) <= 3 * se


def test_cholesky_sample_uses_given_factor():
    grid = TimeGrid.explicit([1.0, 2.0, 4.0])
    cov = cov_matrix(ProcessSpec.fbm(0.75), grid)
    a = cholesky_sample(cov, 20, SEED).values
    b = sample_process(ProcessSpec.fbm(0.75), grid, 20, SEED, backend="cholesky").values
    assert a.tobytes() == b.tobytes()


def test_integrated_paths_variance():
    batch = sample_process(ProcessSpec.brownian(), TimeGrid.uniform(1.0, 400), 20_000, SEED)
    integ = integrate_paths(batch).values[:, -1]
    # Var(int_0^1 W) = 1/3
    assert np.var(integ) == pytest.approx(1 / 3, abs=3 * (1 / 3) * np.sqrt(2 / 20_000))


def test_backend_errors():
    grid = TimeGrid.lamperti(0.1, 1.0, 8)
    with pytest.raises(BackendError):
        sample_process(ProcessSpec.fbm(0.3), grid, 1, SEED, backend="circulant")
    with pytest.raises(BackendError):
        sample_process(ProcessSpec.fbm(0.3), TimeGrid.uniform(1.0, 8), 1, SEED, backend="lamperti")
    with pytest.raises(BackendError):
        sample_process(ProcessSpec.mixed_correlated(1, 0.7, 1, 0.3), grid, 1, SEED, backend="lamperti")
    with pytest.raises(BackendError):
        sample_process(ProcessSpec.fbm(0.3), grid, 1, SEED, backend="nope")
