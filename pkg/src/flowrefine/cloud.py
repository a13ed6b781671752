"""Point clouds: the core data type, synthetic samplers, and file I/O.

Two on-disk formats are supported:

* CSV: first line ``# dim=<d>``, then one comma-separated row per point,
  written with 17 significant digits so values round-trip exactly.
* Packed binary (exact round-trip): little-endian, 8-byte magic
  ``b"FRCLOUD1"``, u32 format version, u64 point count, u64 dimension,
  then count*dim IEEE-754 doubles in row-major order.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .seeding import DOMAIN_SAMPLER, rng_from
from .validation import CloudFormatError, ConfigurationError, as_points_matrix

BINARY_MAGIC = b"FRCLOUD1"
BINARY_VERSION = 1

CSV_FORMAT = "csv"
BINARY_FORMAT = "packed-binary"
_FORMATS = (CSV_FORMAT, BINARY_FORMAT)


@dataclass(frozen=True, eq=False)
class PointCloud:
    """An immutable set of n points in d dimensions with an optional label."""

    points: np.ndarray
    label: str = ""

    def __post_init__(self):
        arr = as_points_matrix(self.points, name="points")
        arr.flags.writeable = False
        object.__setattr__(self, "points", arr)

    @property
    def count(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    def with_label(self, label):
        return PointCloud(self.points, label=label)

    def __repr__(self):
        return f"PointCloud(count={self.count}, dim={self.dim}, label={self.label!r})"


@dataclass(frozen=True)
class MixtureComponent:
    weight: float
    mean: np.ndarray
    covariance: np.ndarray


@dataclass(frozen=True)
class GaussianMixtureSpec:
    """A normalized Gaussian mixture with SPD component covariances."""

    components: tuple = field(default=())

    def __post_init__(self):
        if not self.components:
            raise ConfigurationError("mixture must have at least one component")
        comps = []
        dim = None
        total = 0.0
        for i, comp in enumerate(self.components):
            weight = float(comp.weight)
            if weight <= 0:
                raise ConfigurationError(
                    f"component {i}: weight must be > 0, got {weight}"
                )
            mean = np.asarray(comp.mean, dtype=np.float64).reshape(-1)
            cov = np.asarray(comp.covariance, dtype=np.float64)
            if dim is None:
                dim = mean.shape[0]
            if mean.shape != (dim,) or cov.shape != (dim, dim):
                raise ConfigurationError(
                    f"component {i}: mean/covariance shapes inconsistent with d={dim}"
                )
            if not np.allclose(cov, cov.T, atol=1e-12):
                raise ConfigurationError(f"component {i}: covariance not symmetric")
            try:
                np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                raise ConfigurationError(
                    f"component {i}: covariance not positive definite"
                ) from None
            total += weight
            comps.append(MixtureComponent(weight, mean, cov))
        if abs(total - 1.0) > 1e-12:
            raise ConfigurationError(f"component weights sum to {total}, expected 1")
        object.__setattr__(self, "components", tuple(comps))

    @property
    def dim(self):
        return self.components[0].mean.shape[0]

    @property
    def weights(self):
        return np.array([c.weight for c in self.components])

    @classmethod
    def from_parts(cls, weights, means, covariances):
        return cls(
            tuple(
                MixtureComponent(w, m, c)
                for w, m, c in zip(weights, means, covariances)
            )
        )


def sample_gaussian_mixture(spec, n, seed, label=""):
    """Draw n points from the mixture; deterministic for a given seed."""
    if n < 1:
        raise ConfigurationError(f"n must be >= 1, got {n}")
    rng = rng_from(seed, DOMAIN_SAMPLER, 0)
    d = spec.dim
    assignments = rng.choice(len(spec.components), size=n, p=spec.weights)
    out = np.empty((n, d))
    for k, comp in enumerate(spec.components):
        mask = assignments == k
        m = int(mask.sum())
        if m == 0:
            continue
        chol = np.linalg.cholesky(comp.covariance)
        out[mask] = comp.mean + rng.standard_normal((m, d)) @ chol.T
    return PointCloud(out, label=label)


def sample_standard_normal(d, n, seed, label=""):
    """Draw n i.i.d. points from N(0, I_d); deterministic for a given seed."""
    if d < 1:
        raise ConfigurationError(f"d must be >= 1, got {d}")
    if n < 1:
        raise ConfigurationError(f"n must be >= 1, got {n}")
    rng = rng_from(seed, DOMAIN_SAMPLER, 1)
    return PointCloud(rng.standard_normal((n, d)), label=label)


def _infer_format(path, fmt):
    if fmt is not None:
        if fmt not in _FORMATS:
            raise ConfigurationError(f"unknown cloud format {fmt!r}")
        return fmt
    return CSV_FORMAT if str(path).endswith(".csv") else BINARY_FORMAT


def save_cloud(cloud, path, fmt=None):
    """Write a cloud to `path` in CSV or packed-binary format."""
    fmt = _infer_format(path, fmt)
    if fmt == CSV_FORMAT:
        lines = [f"# dim={cloud.dim}"]
        for row in cloud.points:
            lines.append(",".join(format(x, ".17g") for x in row))
        with open(path, "w", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")
    else:
        with open(path, "wb") as fh:
            fh.write(BINARY_MAGIC)
            fh.write(struct.pack("<IQQ", BINARY_VERSION, cloud.count, cloud.dim))
            fh.write(np.ascontiguousarray(cloud.points, dtype="<f8").tobytes())


def load_cloud(path, fmt=None, label=""):
    """Read a cloud written by save_cloud; errors name the offending row."""
    fmt = _infer_format(path, fmt)
    if fmt == CSV_FORMAT:
        return _load_csv(path, label)
    return _load_binary(path, label)


def _load_csv(path, label):
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("# dim="):
        raise CloudFormatError(f"{path}: missing '# dim=<d>' header line")
    try:
        dim = int(lines[0].split("=", 1)[1])
    except ValueError:
        raise CloudFormatError(f"{path}: malformed dimension header") from None
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != dim:
            raise CloudFormatError(
                f"{path}: line {lineno} has {len(fields)} fields, expected {dim}"
            )
        try:
            row = [float(x) for x in fields]
        except ValueError:
            raise CloudFormatError(
                f"{path}: line {lineno} contains a non-numeric field"
            ) from None
        if not all(np.isfinite(row)):
            raise CloudFormatError(f"{path}: line {lineno} contains NaN/Inf")
        rows.append(row)
    if not rows:
        raise CloudFormatError(f"{path}: no data rows")
    return PointCloud(np.array(rows, dtype=np.float64), label=label)


def _load_binary(path, label):
    with open(path, "rb") as fh:
        data = fh.read()
    header = struct.calcsize("<IQQ")
    if len(data) < len(BINARY_MAGIC) + header:
        raise CloudFormatError(f"{path}: truncated header")
    if data[: len(BINARY_MAGIC)] != BINARY_MAGIC:
        raise CloudFormatError(f"{path}: bad magic, not a packed cloud file")
    version, count, dim = struct.unpack_from("<IQQ", data, len(BINARY_MAGIC))
    if version != BINARY_VERSION:
        raise CloudFormatError(f"{path}: unsupported format version {version}")
    expected = len(BINARY_MAGIC) + header + count * dim * 8
    if len(data) != expected:
        raise CloudFormatError(
            f"{path}: size mismatch ({len(data)} bytes, expected {expected})"
        )
    raw = np.frombuffer(data, dtype="<f8", offset=len(BINARY_MAGIC) + header)
    points = raw.reshape(count, dim).astype(np.float64)
    if not np.isfinite(points).all():
        bad_row = int(np.argwhere(~np.isfinite(points))[0][0])
        raise CloudFormatError(f"{path}: non-finite value at point {bad_row}")
    return PointCloud(points, label=label)
