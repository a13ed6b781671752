"""Iterative transport refinement drivers.

End-path correction repeats full flow-matching rounds, each time restarting
from the previously transported cloud, until the transport cost stops
improving. Gradual refinement instead splits [0, 1] at checkpoints and
re-bases the interpolation path at every checkpoint onto the actually
integrated state, with velocities rescaled by the remaining time.

Both drivers return a RefinementTrace holding every iterate, its cost
report, solver diagnostics, wall times, and the fitted stage fields, so a
finished run can be replayed bitwise from the stored initial cloud.
"""

import time
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .flowmatch import (
    DEFAULT_PAIR_CAP,
    PairingPlan,
    TimeGrid,
    fit_round,
    fit_segment,
)
from .metrics import closest_point_cost
from .ode import OdeConfig, integrate
from .seeding import DOMAIN_STAGE, check_seed, child_seed
from .solvers import CgConfig
from .validation import ConfigurationError, check_same_dim
from .velocity import KernelConfig, summarize_diagnostics

STOP_ABSOLUTE = "absolute"
STOP_RELATIVE = "relative-change"
_RELATIVE_EPS = 1e-12

REASON_CONVERGED = "converged"
REASON_CAP = "cap"


def _default_ode():
    return OdeConfig()


@dataclass(frozen=True)
class EndPathConfig:
    seed: int = 0
    max_outer_iterations: int = 20
    stop_tolerance: float = 0.02
    stop_mode: str = STOP_RELATIVE
    n_slices: int = 16
    pairs_per_slice: int | None = None
    kernel: KernelConfig = dataclass_field(default_factory=KernelConfig)
    cg: CgConfig = dataclass_field(default_factory=CgConfig)
    ode: OdeConfig = dataclass_field(default_factory=_default_ode)

    def __post_init__(self):
        check_seed(self.seed)
        if self.max_outer_iterations < 1:
            raise ConfigurationError("max_outer_iterations must be >= 1")
        if self.stop_tolerance < 0:
            raise ConfigurationError("stop_tolerance must be >= 0")
        if self.stop_mode not in (STOP_ABSOLUTE, STOP_RELATIVE):
            raise ConfigurationError(f"unknown stop_mode {self.stop_mode!r}")
        if self.n_slices < 1:
            raise ConfigurationError("n_slices must be >= 1")


@dataclass(frozen=True)
class GradualConfig:
    """checkpoints are the interior split times; None means 6 uniform
    segments. n_slices is the whole-path budget, divided over segments
    (at least 2 per segment)."""

    seed: int = 0
    checkpoints: tuple | None = None
    n_segments: int = 6
    n_slices: int = 16
    pairs_per_slice: int | None = None
    kernel: KernelConfig = dataclass_field(default_factory=KernelConfig)
    cg: CgConfig = dataclass_field(default_factory=CgConfig)
    ode: OdeConfig = dataclass_field(default_factory=_default_ode)

    def __post_init__(self):
        check_seed(self.seed)
        if self.n_slices < 1:
            raise ConfigurationError("n_slices must be >= 1")
        if self.checkpoints is None:
            if self.n_segments < 1:
                raise ConfigurationError("n_segments must be >= 1")
            pts = tuple(np.linspace(0.0, 1.0, self.n_segments + 1)[1:-1])
            object.__setattr__(self, "checkpoints", pts)
        else:
            pts = tuple(float(t) for t in self.checkpoints)
            if any(b <= a for a, b in zip(pts, pts[1:])):
                raise ConfigurationError("checkpoints must be strictly increasing")
            for t in pts:
                if not 0.0 < t < 1.0:
                    raise ConfigurationError(
                        f"checkpoint {t} must lie strictly inside (0, 1); a "
                        f"checkpoint at 1 would divide by the vanishing "
                        f"remaining time 1 - t"
                    )
            object.__setattr__(self, "checkpoints", pts)
            object.__setattr__(self, "n_segments", len(pts) + 1)

    @property
    def segment_bounds(self):
        return (0.0, *self.checkpoints, 1.0)


@dataclass(frozen=True)
class TraceIterate:
    label: str
    cloud: object            # PointCloud
    cost: object             # CostReport against the target
    diagnostics: dict | None
    wall_time: float


@dataclass(frozen=True)
class TransportStage:
    """One stored transport: integrate `field` over [t_start, t_end]."""

    field: object
    t_start: float
    t_end: float
    num_steps: int
    method: str


@dataclass(frozen=True)
class RefinementTrace:
    algorithm: str
    iterates: tuple
    stages: tuple
    termination_reason: str
    target: object           # PointCloud the costs were measured against

    @property
    def costs(self):
        return [it.cost.value for it in self.iterates]

    @property
    def final_cloud(self):
        return self.iterates[-1].cloud


def stop_check(costs, tolerance, mode=STOP_RELATIVE):
    """Stop decision on a cost sequence: the termination reason, or None to
    continue.

    Absolute mode stops once the latest cost is at or below `tolerance`.
    Relative-change mode stops once the latest improvement
    |c_k - c_{k-1}| / max(c_{k-1}, 1e-12) is at or below `tolerance`; it
    needs at least two entries.
    """
    if hasattr(costs, "iterates"):
        costs = costs.costs
    if not len(costs):
        raise ConfigurationError("stop_check needs a nonempty cost history")
    if mode == STOP_ABSOLUTE:
        return REASON_CONVERGED if costs[-1] <= tolerance else None
    if mode != STOP_RELATIVE:
        raise ConfigurationError(f"unknown stop_mode {mode!r}")
    if len(costs) < 2:
        return None
    previous, current = costs[-2], costs[-1]
    change = abs(current - previous) / max(previous, _RELATIVE_EPS)
    return REASON_CONVERGED if change <= tolerance else None


def end_path_correct(start, target, cfg=EndPathConfig()):
    """Iterate full flow-matching rounds from the latest transported cloud.

    Round j is re-seeded deterministically from cfg.seed, fits a fresh field
    on the straight paths between the current iterate and the target, and
    integrates over the whole horizon. The trace records the initial cloud
    first and every transported iterate after it.
    """
    check_same_dim(start.points, target.points, "start", "target")
    grid = TimeGrid.uniform(cfg.n_slices)
    iterates = [TraceIterate("initial", start,
                             closest_point_cost(start, target), None, 0.0)]
    stages = []
    current = start
    reason = REASON_CAP
    for round_index in range(cfg.max_outer_iterations):
        began = time.perf_counter()
        plan = PairingPlan(child_seed(cfg.seed, DOMAIN_STAGE, round_index),
                           cfg.pairs_per_slice)
        field = fit_round(current, target, grid, plan, cfg.kernel, cfg.cg)
        current, _ = integrate(field, current, cfg.ode)
        elapsed = time.perf_counter() - began
        cost = closest_point_cost(current, target)
        iterates.append(TraceIterate(
            f"round-{round_index + 1}", current, cost,
            summarize_diagnostics(field), elapsed,
        ))
        stages.append(TransportStage(field, cfg.ode.t_start, cfg.ode.t_end,
                                     cfg.ode.num_steps, cfg.ode.method))
        decision = stop_check([it.cost.value for it in iterates],
                              cfg.stop_tolerance, cfg.stop_mode)
        if decision is not None:
            reason = decision
            break
    return RefinementTrace("end-path", tuple(iterates), tuple(stages),
                           reason, target)


def gradual_refine(start, target, cfg=GradualConfig()):
    """Refine the path segment by segment.

    Each segment re-bases the interpolation onto the actually integrated
    state at the segment start and rescales velocities by the remaining
    time, so training points always come from the distribution the
    integrator will actually visit. This tends to be less robust than
    end-path correction when many source trajectories cross early on.
    """
    check_same_dim(start.points, target.points, "start", "target")
    bounds = cfg.segment_bounds
    per_segment = max(2, round(cfg.n_slices / cfg.n_segments))
    base_steps = cfg.ode.num_steps

    iterates = [TraceIterate("initial", start,
                             closest_point_cost(start, target), None, 0.0)]
    stages = []
    current = start
    for seg_index in range(cfg.n_segments):
        lo, hi = bounds[seg_index], bounds[seg_index + 1]
        began = time.perf_counter()
        plan = PairingPlan(child_seed(cfg.seed, DOMAIN_STAGE, seg_index),
                           cfg.pairs_per_slice)
        field = fit_segment(current, target, lo, hi, per_segment,
                            plan, cfg.kernel, cfg.cg)
        steps = max(5, round(base_steps * (hi - lo)))
        seg_ode = OdeConfig(method=cfg.ode.method, num_steps=steps,
                            t_start=lo, t_end=hi)
        current, _ = integrate(field, current, seg_ode)
        elapsed = time.perf_counter() - began
        cost = closest_point_cost(current, target)
        iterates.append(TraceIterate(
            f"segment-{seg_index + 1}", current, cost,
            summarize_diagnostics(field), elapsed,
        ))
        stages.append(TransportStage(field, lo, hi, steps, cfg.ode.method))
    return RefinementTrace("gradual", tuple(iterates), tuple(stages),
                           REASON_CONVERGED, target)


def replay_transport(trace, start):
    """Re-integrate `start` through the stored stage fields in order.

    Applied to the trace's own initial cloud this reproduces the recorded
    final cloud bitwise; applied to new points it transports them through
    the already-fitted pipeline without refitting.
    """
    current = start
    for stage in trace.stages:
        cfg = OdeConfig(method=stage.method, num_steps=stage.num_steps,
                        t_start=stage.t_start, t_end=stage.t_end)
        current, _ = integrate(stage.field, current, cfg)
    return current
