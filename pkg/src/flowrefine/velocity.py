"""Gaussian RBF velocity fields fit per time slice.

A field is a sequence of slice models, each holding centers and one
coefficient vector per output dimension, obtained by solving the
ridge-regularized kernel system with conjugate gradient. Evaluation at an
arbitrary time linearly interpolates the two bracketing slice evaluations
and clamps outside the fitted range.

Evaluation uses ``np.einsum`` throughout rather than BLAS matmul: einsum's
fixed summation order makes results independent of query batching, which
the integrator relies on (integrating points one at a time must match
integrating them stacked, bitwise).
"""

import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .seeding import rng_from
from .solvers import CgConfig, CgDiagnostics, conjugate_gradient
from .validation import ConfigurationError, as_points_matrix, check_same_dim

BANDWIDTH_MEDIAN = "median-heuristic"
BANDWIDTH_FIXED = "fixed"

# Internal seed for the median-heuristic pair subsample; fixed so the
# heuristic is a pure function of its input points.
_MEDIAN_SUBSAMPLE_SEED = 0x6D656469
_MEDIAN_SUBSAMPLE_CAP = 2000

FIELD_MAGIC = b"FRFIELD1"
FIELD_VERSION = 1


@dataclass(frozen=True)
class KernelConfig:
    """Gaussian kernel and ridge settings for slice fits.

    bandwidth_value is the fixed bandwidth when bandwidth_mode="fixed",
    otherwise a multiplier on the median heuristic. max_centers caps the
    number of RBF centers per slice; richer systems are solved in
    sample-averaged normal-equations form on a seeded center subsample.
    """

    bandwidth_mode: str = BANDWIDTH_MEDIAN
    bandwidth_value: float = 1.0
    regularization_beta: float = 1e-4
    max_centers: int | None = 512

    def __post_init__(self):
        if self.bandwidth_mode not in (BANDWIDTH_MEDIAN, BANDWIDTH_FIXED):
            raise ConfigurationError(
                f"unknown bandwidth_mode {self.bandwidth_mode!r}"
            )
        if self.bandwidth_value <= 0:
            raise ConfigurationError("bandwidth_value must be > 0")
        if self.regularization_beta < 0:
            raise ConfigurationError("regularization_beta must be >= 0")
        if self.max_centers is not None and self.max_centers < 1:
            raise ConfigurationError("max_centers must be >= 1 when given")


@dataclass(frozen=True, eq=False)
class SliceModel:
    slice_time: float
    centers: np.ndarray
    coefficients: np.ndarray
    bandwidth: float
    diagnostics: CgDiagnostics

    def __post_init__(self):
        for name in ("centers", "coefficients"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.centers.shape != self.coefficients.shape:
            raise ConfigurationError("centers/coefficients shape mismatch")


@dataclass(frozen=True, eq=False)
class RbfVelocityField:
    """Fitted velocity model: slice models at strictly increasing times."""

    slices: tuple
    kernel_config: KernelConfig

    def __post_init__(self):
        if not self.slices:
            raise ConfigurationError("field must contain at least one slice")
        times = np.array([s.slice_time for s in self.slices])
        if len(times) > 1 and not np.all(np.diff(times) > 0):
            raise ConfigurationError("slice times must be strictly increasing")
        times.flags.writeable = False
        object.__setattr__(self, "slices", tuple(self.slices))
        object.__setattr__(self, "slice_times", times)

    @property
    def dim(self):
        return self.slices[0].centers.shape[1]

    def __call__(self, points, t):
        return evaluate_field(self, points, t)


def _sq_norms(points):
    return np.einsum("ij,ij->i", points, points)


def pairwise_sq_dists(a, b):
    """Squared Euclidean distances, (len(a), len(b)). Fast expansion form;
    rounding can make near-zero entries slightly negative, so they are
    clamped."""
    d = np.dot(a, b.T)
    d *= -2.0
    d += _sq_norms(a)[:, None]
    d += _sq_norms(b)[None, :]
    np.maximum(d, 0.0, out=d)
    return d


def assemble_kernel_matrix(centers, bandwidth):
    """Gaussian kernel matrix exp(-|ci - ck|^2 / (2 bw^2)); symmetric,
    unit diagonal."""
    c = as_points_matrix(centers, name="centers")
    if bandwidth <= 0:
        raise ConfigurationError(f"bandwidth must be > 0, got {bandwidth}")
    cross = np.dot(c, c.T)
    cross *= -2.0
    # add the symmetric pair-sum first so the matrix is exactly symmetric
    sq = _sq_norms(c)
    cross += sq[:, None] + sq[None, :]
    np.maximum(cross, 0.0, out=cross)
    cross *= -1.0 / (2.0 * bandwidth * bandwidth)
    np.exp(cross, out=cross)
    np.fill_diagonal(cross, 1.0)
    return cross


def median_heuristic_bandwidth(points, multiplier=1.0):
    """Median pairwise distance over a seeded subsample, times `multiplier`.

    Deterministic: the subsample RNG is fixed. Raises if the points are all
    identical, in which case a fixed bandwidth must be configured instead.
    """
    pts = as_points_matrix(points, name="points")
    if pts.shape[0] < 2:
        raise ConfigurationError("median heuristic needs at least 2 points")
    if pts.shape[0] > _MEDIAN_SUBSAMPLE_CAP:
        rng = rng_from(_MEDIAN_SUBSAMPLE_SEED)
        idx = rng.permutation(pts.shape[0])[:_MEDIAN_SUBSAMPLE_CAP]
        pts = pts[idx]
    if np.all(pts == pts[0]):
        raise ConfigurationError(
            "all points identical: median distance is 0; "
            "configure a fixed bandwidth instead"
        )
    dists = np.sqrt(pairwise_sq_dists(pts, pts))
    iu = np.triu_indices(pts.shape[0], k=1)
    median = float(np.median(dists[iu]))
    if median <= 0:
        raise ConfigurationError(
            "median pairwise distance is 0; configure a fixed bandwidth instead"
        )
    return median * float(multiplier)


def resolve_bandwidth(points, config):
    """Bandwidth for a slice fit under `config` (median heuristic or fixed)."""
    if config.bandwidth_mode == BANDWIDTH_FIXED:
        return float(config.bandwidth_value)
    return median_heuristic_bandwidth(points, config.bandwidth_value)


def _has_duplicate_rows(points):
    return np.unique(points, axis=0).shape[0] < points.shape[0]


def fit_slice(training_points, target_velocities, t, config, cg=CgConfig(),
              *, bandwidth=None, center_seed=None):
    """Fit one slice model at time `t`.

    With at most max_centers training rows the ridge system
    (K + beta I) theta = v is solved directly on the full kernel matrix.
    With more rows, a seeded uniform subsample of rows becomes the centers
    and the sample-averaged normal equations
    (K'K / n + beta I) theta = K'v / n are solved instead.

    `bandwidth` overrides config resolution (used by round drivers that
    share one bandwidth across slices). `center_seed` makes the subsample
    reproducible; defaults to a fixed internal constant.
    """
    pts = as_points_matrix(training_points, name="training_points")
    vel = as_points_matrix(target_velocities, name="target_velocities")
    if pts.shape != vel.shape:
        raise ConfigurationError(
            f"training_points {pts.shape} and target_velocities {vel.shape} differ"
        )
    if bandwidth is None:
        bandwidth = resolve_bandwidth(pts, config)
    if bandwidth <= 0:
        raise ConfigurationError(f"bandwidth must be > 0, got {bandwidth}")
    beta = config.regularization_beta

    n = pts.shape[0]
    cap = config.max_centers
    if cap is not None and cap < n:
        rng = rng_from(center_seed if center_seed is not None else 0)
        idx = np.sort(rng.permutation(n)[:cap])
        centers = pts[idx]
        cross = pairwise_sq_dists(pts, centers)
        cross *= -1.0 / (2.0 * bandwidth * bandwidth)
        kernel = np.exp(cross, out=cross)
        system = kernel.T @ kernel
        system /= n
        system[np.diag_indices_from(system)] += beta
        rhs = kernel.T @ vel
        rhs /= n
    else:
        centers = pts
        if beta == 0 and _has_duplicate_rows(centers):
            raise ConfigurationError(
                "duplicate training points make the kernel singular; "
                "set regularization_beta > 0"
            )
        system = assemble_kernel_matrix(centers, bandwidth)
        if beta > 0:
            system[np.diag_indices_from(system)] += beta
        rhs = vel

    coeffs, diagnostics = conjugate_gradient(system, rhs, cg)
    return SliceModel(float(t), centers, coeffs, float(bandwidth), diagnostics)


def _evaluate_slice(slice_model, query, query_sq, scratch):
    k = query.shape[0]
    m = slice_model.centers.shape[0]
    key = ("kernel", k, m)
    buf = scratch.get(key) if scratch is not None else None
    if buf is None:
        buf = np.empty((k, m))
        if scratch is not None:
            scratch[key] = buf
    np.einsum("id,jd->ij", query, slice_model.centers, out=buf)
    buf *= -2.0
    buf += query_sq[:, None]
    buf += _sq_norms(slice_model.centers)[None, :]
    np.maximum(buf, 0.0, out=buf)
    buf *= -1.0 / (2.0 * slice_model.bandwidth * slice_model.bandwidth)
    np.exp(buf, out=buf)
    return np.einsum("km,md->kd", buf, slice_model.coefficients)


def evaluate_field(field, query_points, t, scratch=None):
    """Velocity at `query_points` and time `t`.

    At a slice time, the slice's kernel expansion is evaluated directly;
    strictly between two slices the two bracketing evaluations are linearly
    interpolated; outside the fitted range the nearest slice is used.
    `scratch` is an optional caller-owned dict reused across calls to avoid
    reallocating the kernel block.
    """
    q = as_points_matrix(query_points, name="query_points")
    check_same_dim(q, field.slices[0].centers, "query_points", "field centers")
    times = field.slice_times
    q_sq = _sq_norms(q)
    t = float(t)

    if t <= times[0]:
        return _evaluate_slice(field.slices[0], q, q_sq, scratch)
    if t >= times[-1]:
        return _evaluate_slice(field.slices[-1], q, q_sq, scratch)
    hi = int(np.searchsorted(times, t, side="left"))
    if times[hi] == t:
        return _evaluate_slice(field.slices[hi], q, q_sq, scratch)
    lo = hi - 1
    weight = (t - times[lo]) / (times[hi] - times[lo])
    low_val = _evaluate_slice(field.slices[lo], q, q_sq, scratch)
    high_val = _evaluate_slice(field.slices[hi], q, q_sq, scratch)
    low_val *= 1.0 - weight
    high_val *= weight
    low_val += high_val
    return low_val


def summarize_diagnostics(field):
    """Worst-case CG diagnostics across slices (for traces/manifests)."""
    iters = max(s.diagnostics.iterations for s in field.slices)
    residual = max(s.diagnostics.final_relative_residual for s in field.slices)
    converged = all(s.diagnostics.converged for s in field.slices)
    return {
        "max_iterations": iters,
        "max_relative_residual": residual,
        "all_converged": converged,
    }


_MODE_CODES = {BANDWIDTH_MEDIAN: 0, BANDWIDTH_FIXED: 1}
_MODE_NAMES = {v: k for k, v in _MODE_CODES.items()}


def save_field(field, path):
    """Serialize a fitted field to the packed-binary container."""
    cfg = field.kernel_config
    with open(path, "wb") as fh:
        fh.write(FIELD_MAGIC)
        fh.write(struct.pack(
            "<IBddQI",
            FIELD_VERSION,
            _MODE_CODES[cfg.bandwidth_mode],
            cfg.bandwidth_value,
            cfg.regularization_beta,
            0 if cfg.max_centers is None else cfg.max_centers,
            len(field.slices),
        ))
        for s in field.slices:
            diag = s.diagnostics
            fh.write(struct.pack(
                "<ddQQIdBd",
                s.slice_time, s.bandwidth,
                s.centers.shape[0], s.centers.shape[1],
                diag.iterations, diag.final_relative_residual,
                int(diag.converged), diag.min_curvature,
            ))
            fh.write(np.ascontiguousarray(s.centers, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(s.coefficients, dtype="<f8").tobytes())


def load_field(path):
    """Read a field written by save_field."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[: len(FIELD_MAGIC)] != FIELD_MAGIC:
        raise ConfigurationError(f"{path}: not a velocity-field container")
    offset = len(FIELD_MAGIC)
    version, mode, bw_value, beta, cap, n_slices = struct.unpack_from(
        "<IBddQI", data, offset
    )
    if version != FIELD_VERSION:
        raise ConfigurationError(f"{path}: unsupported field version {version}")
    offset += struct.calcsize("<IBddQI")
    config = KernelConfig(
        bandwidth_mode=_MODE_NAMES[mode],
        bandwidth_value=bw_value,
        regularization_beta=beta,
        max_centers=None if cap == 0 else int(cap),
    )
    header = struct.Struct("<ddQQIdBd")
    slices = []
    for _ in range(n_slices):
        t, bw, m, d, iters, residual, converged, curvature = header.unpack_from(
            data, offset
        )
        offset += header.size
        centers = np.frombuffer(data, dtype="<f8", count=m * d, offset=offset)
        offset += m * d * 8
        coeffs = np.frombuffer(data, dtype="<f8", count=m * d, offset=offset)
        offset += m * d * 8
        slices.append(SliceModel(
            t,
            centers.reshape(m, d).astype(np.float64),
            coeffs.reshape(m, d).astype(np.float64),
            bw,
            CgDiagnostics(iters, residual, bool(converged), curvature),
        ))
    if offset != len(data):
        warnings.warn(f"{path}: {len(data) - offset} trailing bytes ignored")
    return RbfVelocityField(tuple(slices), config)
