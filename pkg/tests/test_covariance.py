import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixpersist.covariance import (
    CovarianceError,
    DomainError,
    ccm_cov,
    certify,
    cov_matrix,
    fbm_cov,
    ifbm_cov,
    integrated_cross_cov,
    kernel_cross_integral,
    kernel_product_integral,
    kernel_values,
    lamperti_autocov,
    mixed_cov,
    molchan_golosov_kernel,
    normalizing_constant,
    rl_cov,
    variance,
)
from mixpersist.processes import ProcessSpec, TimeGrid

# reference values from tests/generate_oracles.py (mpmath, 40 digits)
C_075 = 0.9695285467620978
C_025 = 0.7916167435430798
K_07_2_1 = 1.122439681957032
K_03_2_1 = 0.7600029290029944
RL_08_1_3 = 1.019215541567193
IFBM_075_VAR = 2.0 / 7.0
CCM_VAR = 3.945165932245626
LAMPERTI_075_TAU2 = 0.5507060676974118

ALL_SPECS = [
    ProcessSpec.brownian(),
    ProcessSpec.fbm(0.25),
    ProcessSpec.fbm(0.75),
    ProcessSpec.riemann_liouville(0.8),
    ProcessSpec.riemann_liouville(1.5),
    ProcessSpec.integrated_fbm(0.75),
    ProcessSpec.mixed_independent(1, 0.75, 1, 0.5),
    ProcessSpec.mixed_correlated(1, 0.75, 1, 0.5),
    ProcessSpec.integrated_mixed_independent(1, 0.75, 1, 0.5),
    ProcessSpec.integrated_mixed_correlated(1, 0.7, 1, 0.3),
    ProcessSpec.mixed_rl(1, 0.8, 1, 0.4),
]

times = st.floats(1e-3, 1e3, allow_nan=False)


def test_normalizing_constant():
    assert normalizing_constant(0.75) == pytest.approx(C_075, rel=1e-14)
    assert normalizing_constant(0.25) == pytest.approx(C_025, rel=1e-14)
    assert normalizing_constant(0.5) == pytest.approx(1.0, rel=1e-15)


def test_kernel_reference_values():
    assert molchan_golosov_kernel(0.7, 2.0, 1.0) == pytest.approx(K_07_2_1, rel=1e-10)
    assert molchan_golosov_kernel(0.3, 2.0, 1.0) == pytest.approx(K_03_2_1, rel=1e-10)
    assert molchan_golosov_kernel(0.5, 2.0, 1.0) == 1.0


@pytest.mark.parametrize("H", [0.05, 0.3, 0.7, 0.95])
def test_kernel_scalar_and_bulk_routes_agree(H):
    t = np.array([1.0, 2.0, 3.0, 10.0, 1.0, 1.0])
    s = np.array([0.5, 1.0, 0.1, 9.99, 1e-9, 1 - 1e-9])
    bulk = kernel_values(H, t, s)
    scalar = np.array([molchan_golosov_kernel(H, a, b) for a, b in zip(t, s)])
    np.testing.assert_allclose(bulk, scalar, rtol=1e-8)


@pytest.mark.parametrize("H", [0.3, 0.7])
def test_kernel_homogeneity(H):
    for c in (0.01, 3.0, 1e3):
        assert molchan_golosov_kernel(H, 2 * c, c) == pytest.approx(
            c ** (H - 0.5) * molchan_golosov_kernel(H, 2.0, 1.0), rel=1e-10
        )


def test_kernel_domain():
    with pytest.raises(DomainError):
        molchan_golosov_kernel(0.7, 1.0, 1.0)
    with pytest.raises(DomainError):
        molchan_golosov_kernel(0.7, 1.0, 0.0)
    with pytest.raises(DomainError):
        kernel_values(0.3, 1.0, 2.0)


@pytest.mark.parametrize("H", [0.3, 0.7])
@pytest.mark.parametrize("s,t", [(1.0, 1.0), (0.5, 1.0), (1.0, 2.0), (0.1, 3.0), (2.0, 2.5), (1e-3, 1.0)])
def test_ito_isometry(H, s, t):
    assert kernel_product_integral(H, H, s, t) == pytest.approx(fbm_cov(H, s, t), rel=1e-4)


def test_cross_integral_total_mass():
    # K_0.5 = 1, so the cross term at s = t = 1 is 2 int_0^1 K_0.7(1, u) du
    assert kernel_cross_integral(0.7, 0.5, 1.0, 1.0) == pytest.approx(CCM_VAR - 2.0, rel=1e-9)
    assert ccm_cov(1, 1, 0.7, 0.5, 1.0, 1.0) == pytest.approx(CCM_VAR, rel=1e-9)


def test_rl_and_ifbm_reference_values():
    assert rl_cov(0.8, 1.0, 3.0) == pytest.approx(RL_08_1_3, rel=1e-10)
    assert ifbm_cov(0.75, 1.0, 1.0) == pytest.approx(IFBM_075_VAR, rel=1e-13)
    # R^(1/2) is Brownian motion
    assert rl_cov(0.5, 2.0, 5.0) == pytest.approx(2.0, rel=1e-12)


def test_integrated_cross_term_by_direct_quadrature():
    # double integral of the cross covariance over the unit square, as twice the
    # lower triangle with v = u r, by a tensor Gauss-Legendre rule
    x, w = np.polynomial.legendre.leggauss(48)
    x, w = 0.5 * (x + 1), 0.5 * w
    u, r = np.meshgrid(x, x, indexing="ij")
    vals = kernel_cross_integral(0.7, 0.5, u, u * r)
    direct = 2.0 * np.sum(w[:, None] * w[None, :] * u * vals)
    assert integrated_cross_cov(0.7, 0.5, 1.0, 1.0) == pytest.approx(direct, rel=1e-5)


def test_lamperti_reference_value():
    assert lamperti_autocov(ProcessSpec.fbm(0.75), 2.0) == pytest.approx(LAMPERTI_075_TAU2, rel=1e-13)
    assert lamperti_autocov(ProcessSpec.brownian(), 1.3) == pytest.approx(math.exp(-0.65), rel=1e-14)


def test_lamperti_rejects_mixtures():
    with pytest.raises(DomainError):
        lamperti_autocov(ProcessSpec.mixed_independent(1, 0.75, 1, 0.5), 1.0)


def test_fbm_cov_far_apart_times_no_cancellation():
    # for s << t the covariance is ~ H s t^(2H-1); direct formula would lose it
    H, s, t = 0.3, 1e-12, 1.0
    approx = H * s * t ** (2 * H - 1) + 0.5 * s ** (2 * H)
    assert fbm_cov(H, s, t) == pytest.approx(approx, rel=1e-6)


@settings(max_examples=60, deadline=None)
@given(s=times, t=times, H=st.floats(0.05, 0.95))
def test_fbm_symmetry_and_self_similarity(s, t, H):
    assert fbm_cov(H, s, t) == fbm_cov(H, t, s)
    c = 7.3
    assert fbm_cov(H, c * s, c * t) == pytest.approx(c ** (2 * H) * fbm_cov(H, s, t), rel=1e-12)


@pytest.mark.parametrize(
    "spec",
    [
        ProcessSpec.fbm(0.3),
        ProcessSpec.riemann_liouville(0.8),
        ProcessSpec.integrated_fbm(0.75),
        ProcessSpec.mixed_correlated(1, 0.7, 1, 0.3),
    ],
    ids=str,
)
def test_symmetry_and_self_similarity_all_kinds(spec):
    s, t, c = 0.7, 2.9, 3.1
    a = float(mixed_cov(spec, s, t))
    assert a == pytest.approx(float(mixed_cov(spec, t, s)), rel=1e-13)
    if spec.is_pure:
        expect = c ** (2 * spec.index) * a
        assert float(mixed_cov(spec, c * s, c * t)) == pytest.approx(expect, rel=1e-12)


def test_mixture_is_not_self_similar():
    spec = ProcessSpec.mixed_independent(1, 0.75, 1, 0.5)
    v1, v4 = variance(spec, 1.0), variance(spec, 4.0)
    for d in (0.5, 0.75):
        assert abs(v4 - 4 ** (2 * d) * v1) > 0.1


@pytest.mark.parametrize("spec", [ProcessSpec.fbm(0.25), ProcessSpec.mixed_correlated(1, 0.75, -1, 0.5)], ids=str)
def test_cauchy_schwarz(spec):
    t = np.geomspace(1e-2, 1e2, 9)
    c = mixed_cov(spec, t[:, None], t[None, :])
    v = np.diag(c)
    assert np.all(np.abs(c) <= np.sqrt(np.outer(v, v)) * (1 + 1e-12))


def test_nonnegative_for_positive_weights():
    t = np.geomspace(1e-3, 1e3, 13)
    for spec in ALL_SPECS:
        if spec.kind in ("ccm", "iccm"):
            continue
        c = mixed_cov(spec, t[:, None], t[None, :])
        assert np.all(c >= -1e-15), spec


def test_diagonal_matches_variance():
    grid = TimeGrid.lamperti(1e-2, 1e2, 8)
    for spec in ALL_SPECS:
        m = cov_matrix(spec, grid)
        np.testing.assert_allclose(np.diag(m.entries), variance(spec, grid.times), rtol=1e-10, atol=0)


PSD_CASES = [
    (ProcessSpec.fbm(0.25), "lamperti", 2048),
    (ProcessSpec.fbm(0.25), "uniform", 2048),
    (ProcessSpec.fbm(0.75), "lamperti", 2048),
    (ProcessSpec.fbm(0.75), "uniform", 2048),
    (ProcessSpec.riemann_liouville(0.8), "lamperti", 2048),
    (ProcessSpec.riemann_liouville(0.8), "uniform", 2048),
    (ProcessSpec.mixed_independent(1, 0.75, 1, 0.5), "lamperti", 2048),
    (ProcessSpec.mixed_independent(1, 0.75, 1, 0.5), "uniform", 2048),
    (ProcessSpec.mixed_correlated(1, 0.7, 1, 0.5), "lamperti", 2048),
    # the correlated cross term costs one kernel product per distinct ratio s/t;
    # a uniform grid has O(n^2) of them
    (ProcessSpec.mixed_correlated(1, 0.7, 1, 0.5), "uniform", 256),
    (ProcessSpec.integrated_fbm(0.75), "lamperti", 2048),
    (ProcessSpec.integrated_mixed_independent(1, 0.75, 1, 0.5), "uniform", 2048),
    (ProcessSpec.riemann_liouville(1.5), "lamperti", 2048),
    (ProcessSpec.mixed_rl(1, 0.8, 1, 0.4), "lamperti", 2048),
    (ProcessSpec.integrated_mixed_correlated(1, 0.7, 1, 0.3), "lamperti", 32),
]


@pytest.mark.slow
@pytest.mark.parametrize("spec,policy,n", PSD_CASES, ids=lambda v: str(v))
def test_psd_within_jitter_cap(spec, policy, n):
    grid = TimeGrid.lamperti(1e-3, 1e3, n) if policy == "lamperti" else TimeGrid.uniform(1e3, n)
    m = cov_matrix(spec, grid)
    scale = np.max(np.diag(m.entries))
    assert m.jitter_applied <= 1e-10 * scale
    recon = m.factor @ m.factor.T
    np.testing.assert_allclose(recon, m.positive_block + m.jitter_applied * np.eye(n), rtol=0, atol=1e-9 * scale)


def test_certify_rejects_indefinite():
    bad = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(CovarianceError) as info:
        certify(bad)
    assert info.value.min_eigenvalue == pytest.approx(-1.0)


def test_matrix_origin_row_is_zero():
    m = cov_matrix(ProcessSpec.fbm(0.75), TimeGrid.uniform(1.0, 8))
    assert m.entries.shape == (9, 9)
    assert not m.entries[0].any() and not m.entries[:, 0].any()
    assert m.jitter_applied == 0.0
