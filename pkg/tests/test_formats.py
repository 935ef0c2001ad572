import io
import struct

import pytest

from mixpersist import formats
from mixpersist.covariance import cov_matrix
from mixpersist.persistence import ExponentFit, PersistenceEstimate
from mixpersist.processes import ProcessSpec, TimeGrid
from mixpersist.sampling import SeedPolicy, sample_process


def test_covariance_container_round_trip(tmp_path):
    spec = ProcessSpec.mixed_independent(1.0, 0.75, 2.0, 0.5)
    grid = TimeGrid.lamperti(0.1, 10.0, 16)
    cov = cov_matrix(spec, grid)
    path = tmp_path / "cov.bin"
    formats.write_covariance(path, cov)
    spec2, grid2, entries, jitter = formats.read_covariance(path)
    assert spec2 == spec
    assert grid2.times.tobytes() == grid.times.tobytes()
    assert entries.tobytes() == cov.entries.tobytes()
    assert jitter == cov.jitter_applied


def test_container_header_layout(tmp_path):
    grid = TimeGrid.explicit([1.0, 2.0])
    batch = sample_process(ProcessSpec.fbm(0.75), grid, 3, SeedPolicy(7, 9, 11))
    path = tmp_path / "p.bin"
    formats.write_paths(path, batch)
    data = path.read_bytes()
    desc = b"fbm(H=0.75)"
    assert data[:8] == b"MIXPERS1"
    assert struct.unpack_from("<II", data, 8) == (2, len(desc))
    assert data[16 : 16 + len(desc)] == desc
    assert struct.unpack_from("<dQQQQQ", data, 16 + len(desc)) == (0.0, 7, 9, 11, 2, 3)
    assert len(data) == 16 + len(desc) + 48 + 8 * 2 + 8 * 6
    spec, grid2, values, seed = formats.read_paths(path)
    assert seed == (7, 9, 11)
    assert values.tobytes() == batch.values.tobytes()


def test_container_rejects_corruption(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOTMAGIC" + b"\0" * 40)
    with pytest.raises(formats.FormatError):
        formats.read_paths(path)
    grid = TimeGrid.explicit([1.0])
    formats.write_covariance(path, cov_matrix(ProcessSpec.brownian(), grid))
    with pytest.raises(formats.FormatError):
        formats.read_paths(path)
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(formats.FormatError):
        formats.read_covariance(path)


def test_path_csv_round_trip():
    batch = sample_process(ProcessSpec.fbm(0.3), TimeGrid.uniform(1.0, 5), 4, SeedPolicy(1))
    buf = io.StringIO()
    formats.paths_to_csv(batch, buf)
    times, values = formats.paths_from_csv(io.StringIO(buf.getvalue()))
    assert times.tobytes() == batch.grid.times.tobytes()
    assert values.tobytes() == batch.values.tobytes()


def test_estimate_csv_round_trip():
    ests = [PersistenceEstimate(16.0, 0.25, 0.24, 0.26, 1000, 321, (0.25 * 0.75 / 1000) ** 0.5)]
    text = formats.to_text(formats.estimates_to_csv, ests)
    assert text.splitlines()[0] == "T,p_hat,ci_low,ci_high,n_paths,grid_points_used"
    back = formats.estimates_from_csv(io.StringIO(text))
    assert back == ests
    with pytest.raises(formats.FormatError):
        formats.estimates_from_csv(io.StringIO("T,p\n1,2\n"))


def test_fit_csv_columns():
    fit = ExponentFit(0.25, 0.01, -0.1, 0.99, 64.0, 4096.0, 2, 7)
    text = formats.to_text(formats.fits_to_csv, [("fbm(H=0.75)", fit)])
    head, row = text.splitlines()
    assert head == "spec,theta_hat,stderr,intercept,r_squared,T_min,T_max,burn_in"
    assert row == "fbm(H=0.75),0.25,0.01,-0.1,0.99,64.0,4096.0,2"
