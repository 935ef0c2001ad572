"""On-disk formats: binary container for matrices and paths, CSV tables.

Binary container (all integers and floats little-endian)::

    offset  size  field
    0       8     magic b"MIXPERS1"
    8       4     u32 content type: 1 = covariance matrix, 2 = path batch
    12      4     u32 L, byte length of the descriptor
    16      L     UTF-8 process descriptor, e.g. "fbm(H=0.75)"
    16+L    8     f64 jitter applied (0 for path batches)
    +8      8     u64 master seed (0 for matrices)
    +8      8     u64 experiment id (0 for matrices)
    +8      8     u64 first replicate index (0 for matrices)
    +8      8     u64 n_times
    +8      8     u64 n_rows (n_times for matrices, n_paths for batches)
    +8      8*n_times          f64 grid times
    ...     8*n_rows*n_times   f64 payload, row-major

The grid is stored by its times only; it is read back as an explicit grid.

Path CSV: header row of grid times (``repr`` of each float), then one row per
replicate.  Estimate and fit CSVs follow the column lists below.
"""

from __future__ import annotations

import csv
import io
import struct

import numpy as np

from .processes import ProcessSpec, TimeGrid

MAGIC = b"MIXPERS1"
KIND_COVARIANCE = 1
KIND_PATHS = 2

ESTIMATE_COLUMNS = ("T", "p_hat", "ci_low", "ci_high", "n_paths", "grid_points_used")
FIT_COLUMNS = ("spec", "theta_hat", "stderr", "intercept", "r_squared", "T_min", "T_max", "burn_in")


class FormatError(ValueError):
    """Malformed file."""


def _pack(kind, descriptor, jitter, seed_fields, times, payload) -> bytes:
    desc = descriptor.encode("utf-8")
    times = np.ascontiguousarray(times, dtype="<f8")
    payload = np.ascontiguousarray(payload, dtype="<f8")
    head = MAGIC + struct.pack("<II", kind, len(desc)) + desc
    head += struct.pack("<dQQQQQ", jitter, *seed_fields, times.size, payload.shape[0])
    return head + times.tobytes() + payload.tobytes()


def _unpack(data: bytes):
    if data[:8] != MAGIC:
        raise FormatError("not a container file (bad magic)")
    try:
        kind, dlen = struct.unpack_from("<II", data, 8)
        pos = 16
        descriptor = data[pos : pos + dlen].decode("utf-8")
        pos += dlen
        jitter, seed, exp_id, first, n_times, n_rows = struct.unpack_from("<dQQQQQ", data, pos)
        pos += 48
        times = np.frombuffer(data, "<f8", n_times, pos)
        pos += 8 * n_times
        payload = np.frombuffer(data, "<f8", n_rows * n_times, pos).reshape(n_rows, n_times)
        pos += 8 * n_rows * n_times
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise FormatError(f"truncated or corrupt container: {exc}") from exc
    if pos != len(data):
        raise FormatError("trailing bytes after payload")
    return kind, descriptor, jitter, (seed, exp_id, first), times.copy(), payload.copy()


def write_covariance(path, cov) -> None:
    with open(path, "wb") as fh:
        fh.write(
            _pack(KIND_COVARIANCE, cov.spec.descriptor(), cov.jitter_applied, (0, 0, 0), cov.grid.times, cov.entries)
        )


def read_covariance(path):
    """Return ``(spec, grid, entries, jitter)``."""
    with open(path, "rb") as fh:
        kind, desc, jitter, _, times, payload = _unpack(fh.read())
    if kind != KIND_COVARIANCE:
        raise FormatError("file does not hold a covariance matrix")
    return ProcessSpec.parse(desc), TimeGrid.explicit(times), payload, jitter


def write_paths(path, batch) -> None:
    s = batch.seed
    with open(path, "wb") as fh:
        fh.write(
            _pack(
                KIND_PATHS,
                batch.spec.descriptor(),
                0.0,
                (s.master_seed, s.experiment_id, s.first_replicate),
                batch.grid.times,
                batch.values,
            )
        )


def read_paths(path):
    """Return ``(spec, grid, values, (master_seed, experiment_id, first_replicate))``."""
    with open(path, "rb") as fh:
        kind, desc, _, seed, times, payload = _unpack(fh.read())
    if kind != KIND_PATHS:
        raise FormatError("file does not hold a path batch")
    return ProcessSpec.parse(desc), TimeGrid.explicit(times), payload, seed


def paths_to_csv(batch, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow([repr(float(t)) for t in batch.grid.times])
    for row in batch.values:
        w.writerow([repr(float(v)) for v in row])


def paths_from_csv(fh):
    """Return ``(times, values)``."""
    rows = list(csv.reader(fh))
    if not rows:
        raise FormatError("empty path CSV")
    times = np.array([float(v) for v in rows[0]])
    values = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, times.size)
    return times, values


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def estimates_to_csv(estimates, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(ESTIMATE_COLUMNS)
    for e in estimates:
        w.writerow([_fmt(getattr(e, c)) for c in ESTIMATE_COLUMNS])


def estimates_from_csv(fh) -> list:
    from .persistence import PersistenceEstimate

    reader = csv.DictReader(fh)
    if tuple(reader.fieldnames or ()) != ESTIMATE_COLUMNS:
        raise FormatError(f"estimate CSV needs columns {', '.join(ESTIMATE_COLUMNS)}")
    out = []
    for row in reader:
        n = int(row["n_paths"])
        p = float(row["p_hat"])
        out.append(
            PersistenceEstimate(
                float(row["T"]), p, float(row["ci_low"]), float(row["ci_high"]), n,
                int(row["grid_points_used"]), (p * (1 - p) / n) ** 0.5, p == 0,
            )
        )
    return out


def fits_to_csv(rows, fh) -> None:
    """``rows`` is a sequence of ``(spec_label, ExponentFit)``."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(FIT_COLUMNS)
    for label, fit in rows:
        w.writerow(
            [label]
            + [_fmt(getattr(fit, c)) for c in ("theta_hat", "stderr", "intercept", "r_squared", "T_min", "T_max")]
            + [fit.burn_in]
        )


def to_text(writer, *args) -> str:
    buf = io.StringIO()
    writer(*args, buf)
    return buf.getvalue()
