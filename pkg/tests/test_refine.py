import numpy as np
import pytest

from flowrefine import (
    ConfigurationError,
    EndPathConfig,
    GaussianMixtureSpec,
    GradualConfig,
    KernelConfig,
    OdeConfig,
    PointCloud,
    closest_point_cost,
    end_path_correct,
    gradual_refine,
    replay_transport,
    sample_gaussian_mixture,
    stop_check,
)

FAST = dict(n_slices=8, ode=OdeConfig(num_steps=12),
            kernel=KernelConfig(max_centers=256))


def mixture_cloud(means, sigma, n, seed, weights=None):
    k = len(means)
    weights = weights or [1.0 / k] * k
    spec = GaussianMixtureSpec.from_parts(
        weights, [np.asarray(m, dtype=float) for m in means],
        [np.eye(len(means[0])) * sigma ** 2] * k)
    return sample_gaussian_mixture(spec, n, seed)


class TestStopCheck:
    def test_large_relative_change_continues(self):
        assert stop_check([10.0, 1.0], 0.05) is None

    def test_small_relative_change_stops(self):
        assert stop_check([1.00, 0.99], 0.05) == "converged"

    def test_single_entry_continues(self):
        assert stop_check([5.0], 0.05) is None

    def test_absolute_mode(self):
        assert stop_check([10.0, 0.5], 1.0, mode="absolute") == "converged"
        assert stop_check([10.0, 2.0], 1.0, mode="absolute") is None

    def test_zero_history_rejected(self):
        with pytest.raises(ConfigurationError):
            stop_check([], 0.05)

    def test_accepts_trace(self):
        cloud = PointCloud(np.zeros((3, 2)))
        cfg = EndPathConfig(seed=0, max_outer_iterations=1, **FAST)
        trace = end_path_correct(cloud, cloud, cfg)
        assert stop_check(trace, 0.05) in (None, "converged")


class TestEndPath:
    def test_fixed_point_stops_immediately(self):
        # identical degenerate clouds: every velocity target is exactly zero,
        # so the first round transports nothing and the relative-change rule
        # fires at its first evaluation
        cloud = PointCloud(np.tile([[0.5, -1.5]], (40, 1)))
        cfg = EndPathConfig(seed=1, **FAST)
        trace = end_path_correct(cloud, cloud, cfg)
        assert trace.termination_reason == "converged"
        assert len(trace.iterates) == 2
        assert trace.costs[0] == 0.0
        assert trace.costs[1] == 0.0

    def test_identical_realistic_clouds_stay_close(self):
        cloud = mixture_cloud([[0, 0], [3, 3]], 0.5, 150, seed=2)
        cfg = EndPathConfig(seed=2, max_outer_iterations=1, **FAST)
        trace = end_path_correct(cloud, cloud, cfg)
        scale = float(np.square(cloud.points).mean())
        assert trace.costs[1] <= 0.05 * scale

    def test_trace_costs_recomputable(self):
        start = mixture_cloud([[-3, 0]], 0.6, 120, seed=3)
        target = mixture_cloud([[3, -1], [3, 1]], 0.4, 120, seed=4)
        cfg = EndPathConfig(seed=3, max_outer_iterations=2,
                            stop_tolerance=0.0, stop_mode="absolute", **FAST)
        trace = end_path_correct(start, target, cfg)
        for it in trace.iterates:
            again = closest_point_cost(it.cloud, target)
            assert abs(again.value - it.cost.value) <= 1e-12

    def test_replay_reproduces_final_cloud_bitwise(self):
        start = mixture_cloud([[-3, 0]], 0.6, 100, seed=5)
        target = mixture_cloud([[3, 0]], 0.6, 100, seed=6)
        cfg = EndPathConfig(seed=5, max_outer_iterations=3,
                            stop_tolerance=0.0, stop_mode="absolute", **FAST)
        trace = end_path_correct(start, target, cfg)
        assert len(trace.stages) == 3
        replayed = replay_transport(trace, start)
        assert np.array_equal(replayed.points, trace.final_cloud.points)

    def test_cap_reason_recorded(self):
        start = mixture_cloud([[-3, 0]], 0.6, 80, seed=7)
        target = mixture_cloud([[3, 0]], 0.6, 80, seed=8)
        cfg = EndPathConfig(seed=7, max_outer_iterations=1,
                            stop_tolerance=0.0, stop_mode="absolute", **FAST)
        trace = end_path_correct(start, target, cfg)
        assert trace.termination_reason == "cap"

    def test_empirical_contraction_small_benchmark(self):
        # scaled-down mixture benchmark: median per-iteration ratio < 1
        # across seeds for the first three rounds
        ratios = {0: [], 1: [], 2: []}
        for seed in range(1, 6):
            start = mixture_cloud([[-4, -3], [-4, 3]], 0.5, 300, seed=10 + seed)
            target = mixture_cloud([[4, -2], [4, 0], [4, 2]], 0.5, 300,
                                   seed=20 + seed)
            cfg = EndPathConfig(seed=seed, max_outer_iterations=3,
                                stop_tolerance=0.0, stop_mode="absolute",
                                n_slices=8, ode=OdeConfig(num_steps=20),
                                kernel=KernelConfig(max_centers=256))
            trace = end_path_correct(start, target, cfg)
            for k in range(3):
                ratios[k].append(trace.costs[k + 1] / trace.costs[k])
        for k in range(3):
            assert np.median(ratios[k]) < 1.0


class TestGradual:
    def test_single_segment_equals_one_end_path_round(self):
        start = mixture_cloud([[-2, 0]], 0.5, 90, seed=9)
        target = mixture_cloud([[2, 0]], 0.5, 90, seed=10)
        ep = end_path_correct(start, target,
                              EndPathConfig(seed=11, max_outer_iterations=1,
                                            stop_tolerance=0.0,
                                            stop_mode="absolute", **FAST))
        gr = gradual_refine(start, target,
                            GradualConfig(seed=11, n_segments=1, **FAST))
        assert np.array_equal(ep.final_cloud.points, gr.final_cloud.points)

    def test_default_checkpoints_six_uniform(self):
        cfg = GradualConfig(seed=0)
        assert cfg.n_segments == 6
        assert np.allclose(cfg.checkpoints, np.arange(1, 6) / 6.0)

    def test_checkpoint_at_one_rejected(self):
        with pytest.raises(ConfigurationError, match="1 - t"):
            GradualConfig(seed=0, checkpoints=(0.5, 1.0))

    def test_checkpoints_must_increase(self):
        with pytest.raises(ConfigurationError, match="increasing"):
            GradualConfig(seed=0, checkpoints=(0.5, 0.25))

    def test_costs_decrease_toward_target(self):
        start = mixture_cloud([[-3, -1], [-3, 1]], 0.5, 200, seed=12)
        target = mixture_cloud([[3, -1], [3, 1]], 0.5, 200, seed=13)
        cfg = GradualConfig(seed=12, n_segments=4, **FAST)
        trace = gradual_refine(start, target, cfg)
        assert len(trace.iterates) == 5
        assert trace.costs[-1] < 0.05 * trace.costs[0]
        # every recorded iterate cost is recomputable
        for it in trace.iterates:
            assert abs(closest_point_cost(it.cloud, target).value
                       - it.cost.value) <= 1e-12

    def test_replay_reproduces_final_cloud_bitwise(self):
        start = mixture_cloud([[-2, 1]], 0.5, 80, seed=14)
        target = mixture_cloud([[2, -1]], 0.5, 80, seed=15)
        cfg = GradualConfig(seed=13, n_segments=3, **FAST)
        trace = gradual_refine(start, target, cfg)
        replayed = replay_transport(trace, start)
        assert np.array_equal(replayed.points, trace.final_cloud.points)

    def test_segment_step_counts_scale_with_length(self):
        start = mixture_cloud([[-2, 0]], 0.5, 60, seed=16)
        target = mixture_cloud([[2, 0]], 0.5, 60, seed=17)
        cfg = GradualConfig(seed=14, n_segments=4, n_slices=8,
                            ode=OdeConfig(num_steps=40),
                            kernel=KernelConfig(max_centers=128))
        trace = gradual_refine(start, target, cfg)
        for stage in trace.stages:
            expected = max(5, round(40 * (stage.t_end - stage.t_start)))
            assert stage.num_steps == expected
