"""One round of flow matching between two point clouds.

Training data lives on straight interpolation paths between randomly paired
source and target samples: a point at mixing weight lam is
``lam * target + (1 - lam) * source`` and carries the constant pair
difference (optionally rescaled) as its velocity target. A round fits one
RBF slice model per grid time on fresh pairs, sharing a single bandwidth
resolved on the pooled slice points, and the resulting field is integrated
to transport clouds.
"""

from dataclasses import dataclass

import numpy as np

from .ode import OdeConfig, integrate
from .seeding import DOMAIN_CENTERS, DOMAIN_PAIRING, check_seed, child_seed, rng_from
from .solvers import CgConfig
from .validation import ConfigurationError, check_same_dim
from .velocity import (
    BANDWIDTH_MEDIAN,
    KernelConfig,
    RbfVelocityField,
    fit_slice,
    median_heuristic_bandwidth,
)

DEFAULT_PAIR_CAP = 4096
PAIRING_INDEPENDENT = "independent-uniform"


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing fit times inside [0, horizon]."""

    times: tuple
    horizon: float = 1.0

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        if not times:
            raise ConfigurationError("time grid must be nonempty")
        if any(t < 0 or t > self.horizon for t in times):
            raise ConfigurationError(
                f"grid times must lie in [0, {self.horizon}]"
            )
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigurationError("grid times must be strictly increasing")
        object.__setattr__(self, "times", times)

    @classmethod
    def uniform(cls, n_slices=16, t_lo=0.0, t_hi=1.0, horizon=1.0):
        if n_slices < 1:
            raise ConfigurationError("n_slices must be >= 1")
        if n_slices == 1:
            times = (0.5 * (t_lo + t_hi),)
        else:
            times = tuple(np.linspace(t_lo, t_hi, n_slices))
        return cls(times, horizon=horizon)


@dataclass(frozen=True)
class PairingPlan:
    """How homotopy pairs are drawn: P independent uniform pairs per slice
    (with replacement), re-seeded per slice from `seed`.

    pairs_per_slice=None resolves to min(n_source * n_target, 4096) at fit
    time.
    """

    seed: int
    pairs_per_slice: int | None = None
    mode: str = PAIRING_INDEPENDENT

    def __post_init__(self):
        check_seed(self.seed)
        if self.pairs_per_slice is not None and self.pairs_per_slice < 1:
            raise ConfigurationError("pairs_per_slice must be >= 1 when given")
        if self.mode != PAIRING_INDEPENDENT:
            raise ConfigurationError(f"unknown pairing mode {self.mode!r}")

    def resolve_pairs(self, n_source, n_target):
        if self.pairs_per_slice is not None:
            return self.pairs_per_slice
        return min(n_source * n_target, DEFAULT_PAIR_CAP)


@dataclass(frozen=True, eq=False)
class HomotopyBatch:
    """Training data for one slice, with the pair indices retained so the
    construction can be recomputed and checked."""

    slice_time: float
    mix: float                 # weight on the target sample
    velocity_scale: float
    source_indices: np.ndarray
    target_indices: np.ndarray
    points: np.ndarray
    velocities: np.ndarray


def _combine(source_points, target_points, source_idx, target_idx, mix, scale):
    sel_source = source_points[source_idx]
    sel_target = target_points[target_idx]
    points = mix * sel_target + (1.0 - mix) * sel_source
    velocities = (sel_target - sel_source) * scale
    return points, velocities


def _draw_pairs(plan, n_source, n_target, slice_index):
    rng = rng_from(plan.seed, DOMAIN_PAIRING, slice_index)
    n_pairs = plan.resolve_pairs(n_source, n_target)
    source_idx = rng.integers(0, n_source, n_pairs)
    target_idx = rng.integers(0, n_target, n_pairs)
    return source_idx, target_idx


def _make_batch(start, target, t, mix, scale, plan, slice_index):
    source_idx, target_idx = _draw_pairs(plan, start.count, target.count,
                                         slice_index)
    points, velocities = _combine(start.points, target.points,
                                  source_idx, target_idx, mix, scale)
    return HomotopyBatch(float(t), float(mix), float(scale),
                         source_idx, target_idx, points, velocities)


def build_homotopy_batch(start, target, t, plan, slice_index=0):
    """Training batch on the straight source-to-target paths at time `t`
    (horizon 1): mixing weight t, unscaled pair-difference velocities."""
    check_same_dim(start.points, target.points, "start", "target")
    if not 0.0 <= t <= 1.0:
        raise ConfigurationError(f"slice time must lie in [0, 1], got {t}")
    return _make_batch(start, target, t, t, 1.0, plan, slice_index)


def build_corrected_batch(current, target, t, segment_start, plan, slice_index=0):
    """Training batch on re-based paths from the integrated state at
    `segment_start` to the target over the remaining time: mixing weight
    (t - s)/(1 - s) and velocities scaled by 1/(1 - s)."""
    check_same_dim(current.points, target.points, "current", "target")
    s = float(segment_start)
    if not 0.0 <= s < 1.0:
        raise ConfigurationError(
            f"segment start must lie in [0, 1), got {s} (1 - s would vanish)"
        )
    if not s <= t <= 1.0:
        raise ConfigurationError(f"slice time {t} outside segment [{s}, 1]")
    scale = 1.0 / (1.0 - s)
    mix = (t - s) * scale
    return _make_batch(current, target, t, mix, scale, plan, slice_index)


def recompute_batch(batch, start, target):
    """Recompute (points, velocities) of a batch from raw clouds and the
    stored pair indices; bitwise-equal to the stored arrays."""
    return _combine(start.points, target.points,
                    batch.source_indices, batch.target_indices,
                    batch.mix, batch.velocity_scale)


def fit_batches(batches, kernel, cg=CgConfig(), *, seed=0):
    """Fit one slice model per batch with a shared bandwidth.

    Under the median heuristic the bandwidth is resolved once on the pooled
    batch points, so every slice of a round lives in the same kernel scale;
    per-slice resolution would give early and late slices incompatible
    smoothing. Center subsamples are re-seeded per slice from `seed`.
    """
    if not batches:
        raise ConfigurationError("no batches to fit")
    if kernel.bandwidth_mode == BANDWIDTH_MEDIAN:
        pool = np.concatenate([b.points for b in batches])
        bandwidth = median_heuristic_bandwidth(pool, kernel.bandwidth_value)
    else:
        bandwidth = kernel.bandwidth_value
    slices = []
    for i, batch in enumerate(batches):
        slices.append(fit_slice(
            batch.points, batch.velocities, batch.slice_time, kernel, cg,
            bandwidth=bandwidth,
            center_seed=child_seed(seed, DOMAIN_CENTERS, i),
        ))
    return RbfVelocityField(tuple(slices), kernel)


def fit_round(start, target, grid=None, plan=None, kernel=KernelConfig(),
              cg=CgConfig()):
    """Fit a velocity field for one full flow-matching round.

    Draws fresh pairs per grid time, builds the straight-path batches, and
    fits all slice models. Deterministic given plan.seed.
    """
    check_same_dim(start.points, target.points, "start", "target")
    if grid is None:
        grid = TimeGrid.uniform()
    if plan is None:
        raise ConfigurationError("a PairingPlan (with seed) is required")
    batches = [
        build_homotopy_batch(start, target, t, plan, slice_index=i)
        for i, t in enumerate(grid.times)
    ]
    return fit_batches(batches, kernel, cg, seed=plan.seed)


def fit_segment(current, target, segment_start, segment_end, n_slices,
                plan, kernel=KernelConfig(), cg=CgConfig()):
    """Fit a velocity field for one re-based segment
    [segment_start, segment_end] of a gradually refined path."""
    check_same_dim(current.points, target.points, "current", "target")
    if not segment_start < segment_end <= 1.0:
        raise ConfigurationError(
            f"bad segment [{segment_start}, {segment_end}]"
        )
    times = np.linspace(segment_start, segment_end, max(2, int(n_slices)))
    batches = [
        build_corrected_batch(current, target, t, segment_start, plan,
                              slice_index=i)
        for i, t in enumerate(times)
    ]
    return fit_batches(batches, kernel, cg, seed=plan.seed)


def transport(start, field, ode=OdeConfig()):
    """Integrate `start` through `field`; returns the final cloud."""
    final, _ = integrate(field, start, ode)
    return final
