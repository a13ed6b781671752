import numpy as np
import pytest

from flowrefine import (
    ConfigurationError,
    GaussianMixtureSpec,
    KernelConfig,
    OdeConfig,
    PairingPlan,
    PointCloud,
    TimeGrid,
    build_corrected_batch,
    build_homotopy_batch,
    evaluate_field,
    fit_round,
    recompute_batch,
    sample_gaussian_mixture,
    sample_standard_normal,
    transport,
)

FAST_KERNEL = KernelConfig(max_centers=256)


def small_clouds(seed=0, n=50, d=2):
    rng = np.random.default_rng(seed)
    return (PointCloud(rng.standard_normal((n, d))),
            PointCloud(rng.standard_normal((n, d)) + 3.0))


class TestTimeGrid:
    def test_uniform(self):
        grid = TimeGrid.uniform(5)
        assert grid.times[0] == 0.0 and grid.times[-1] == 1.0
        assert len(grid.times) == 5

    def test_single_slice_midpoint(self):
        assert TimeGrid.uniform(1).times == (0.5,)

    def test_rejects_unsorted(self):
        with pytest.raises(ConfigurationError):
            TimeGrid((0.5, 0.2))

    def test_rejects_outside_horizon(self):
        with pytest.raises(ConfigurationError):
            TimeGrid((0.5, 1.5))


class TestPairingPlan:
    def test_default_pair_resolution(self):
        plan = PairingPlan(seed=0)
        assert plan.resolve_pairs(2000, 2000) == 4096
        assert plan.resolve_pairs(10, 10) == 100

    def test_explicit_count(self):
        assert PairingPlan(seed=0, pairs_per_slice=7).resolve_pairs(5, 5) == 7

    def test_rejects_unknown_mode(self):
        with pytest.raises(ConfigurationError):
            PairingPlan(seed=0, mode="sorted")


class TestHomotopyBatch:
    def test_endpoints_reproduce_samples(self):
        start, target = small_clouds()
        plan = PairingPlan(seed=5, pairs_per_slice=30)
        at_zero = build_homotopy_batch(start, target, 0.0, plan)
        assert np.array_equal(at_zero.points,
                              start.points[at_zero.source_indices])
        at_one = build_homotopy_batch(start, target, 1.0, plan)
        assert np.array_equal(at_one.points,
                              target.points[at_one.target_indices])

    def test_hand_computed_midpoint(self):
        start = PointCloud(np.array([[0.0, 0.0]]))
        target = PointCloud(np.array([[2.0, 4.0]]))
        batch = build_homotopy_batch(start, target, 0.5,
                                     PairingPlan(seed=0, pairs_per_slice=1))
        assert np.array_equal(batch.points, [[1.0, 2.0]])
        assert np.array_equal(batch.velocities, [[2.0, 4.0]])

    def test_recompute_is_bitwise(self):
        start, target = small_clouds(seed=3)
        plan = PairingPlan(seed=9, pairs_per_slice=40)
        batch = build_homotopy_batch(start, target, 0.37, plan)
        points, velocities = recompute_batch(batch, start, target)
        assert np.array_equal(points, batch.points)
        assert np.array_equal(velocities, batch.velocities)

    def test_velocity_triangle_bound(self):
        start, target = small_clouds(seed=4)
        batch = build_homotopy_batch(start, target, 0.6,
                                     PairingPlan(seed=1, pairs_per_slice=64))
        v_norm = np.linalg.norm(batch.velocities, axis=1)
        bound = (np.linalg.norm(target.points[batch.target_indices], axis=1)
                 + np.linalg.norm(start.points[batch.source_indices], axis=1))
        assert np.all(v_norm <= bound + 1e-12)

    def test_deterministic_per_seed_and_slice(self):
        start, target = small_clouds(seed=5)
        plan = PairingPlan(seed=2, pairs_per_slice=16)
        a = build_homotopy_batch(start, target, 0.5, plan, slice_index=3)
        b = build_homotopy_batch(start, target, 0.5, plan, slice_index=3)
        c = build_homotopy_batch(start, target, 0.5, plan, slice_index=4)
        assert np.array_equal(a.points, b.points)
        assert not np.array_equal(a.points, c.points)

    def test_dimension_mismatch(self):
        start, _ = small_clouds(d=2)
        _, target = small_clouds(d=3)
        with pytest.raises(ConfigurationError):
            build_homotopy_batch(start, target, 0.5, PairingPlan(seed=0))


class TestCorrectedBatch:
    def test_segment_start_reproduces_current_state(self):
        current, target = small_clouds(seed=6)
        batch = build_corrected_batch(current, target, 0.5, 0.5,
                                      PairingPlan(seed=3, pairs_per_slice=20))
        assert batch.mix == 0.0
        assert np.array_equal(batch.points,
                              current.points[batch.source_indices])

    def test_final_time_reproduces_target(self):
        current, target = small_clouds(seed=7)
        batch = build_corrected_batch(current, target, 1.0, 5.0 / 6.0,
                                      PairingPlan(seed=4, pairs_per_slice=20))
        assert batch.mix == 1.0
        assert np.array_equal(batch.points,
                              target.points[batch.target_indices])

    def test_velocity_rescaled_by_remaining_time(self):
        current, target = small_clouds(seed=8)
        s = 0.75
        batch = build_corrected_batch(current, target, 0.8, s,
                                      PairingPlan(seed=5, pairs_per_slice=20))
        plain = (target.points[batch.target_indices]
                 - current.points[batch.source_indices])
        assert np.array_equal(batch.velocities, plain * (1.0 / (1.0 - s)))

    def test_segment_start_at_one_rejected(self):
        current, target = small_clouds(seed=9)
        with pytest.raises(ConfigurationError, match="1 - s"):
            build_corrected_batch(current, target, 1.0, 1.0,
                                  PairingPlan(seed=0, pairs_per_slice=4))


class TestFitRound:
    def test_identical_single_point_gives_zero_field(self):
        point = PointCloud(np.array([[1.0, -2.0]]))
        field = fit_round(point, point, TimeGrid.uniform(4),
                          PairingPlan(seed=0, pairs_per_slice=4),
                          KernelConfig(bandwidth_mode="fixed",
                                       bandwidth_value=1.0))
        moved = transport(point, field, OdeConfig(num_steps=10))
        assert np.linalg.norm(moved.points - point.points) <= 1e-9

    def test_translation_recovered_within_standard_error(self):
        # independent pairing: expected pair difference equals the mean shift
        n, pairs = 1500, 4096
        shift = np.array([6.0, 4.0])
        source = sample_standard_normal(2, n, seed=11)
        spec = GaussianMixtureSpec.from_parts([1.0], [shift], [np.eye(2)])
        target = sample_gaussian_mixture(spec, n, seed=12)
        field = fit_round(source, target, TimeGrid.uniform(8),
                          PairingPlan(seed=13, pairs_per_slice=pairs),
                          FAST_KERNEL)
        moved = transport(source, field, OdeConfig(num_steps=25))
        displacement = (moved.points - source.points).mean(axis=0)
        standard_error = np.sqrt(2.0 / pairs)
        assert np.all(np.abs(displacement - shift) <= 3 * standard_error)

    def test_single_slice_grid_defined_everywhere(self):
        start, target = small_clouds(seed=10)
        field = fit_round(start, target, TimeGrid.uniform(1),
                          PairingPlan(seed=6, pairs_per_slice=32),
                          FAST_KERNEL)
        query = start.points[:4]
        for t in (0.0, 0.5, 1.0):
            assert np.array_equal(evaluate_field(field, query, t),
                                  evaluate_field(field, query, 0.5))

    def test_seed_determinism_bitwise(self):
        start, target = small_clouds(seed=11)
        grid = TimeGrid.uniform(4)
        plan = PairingPlan(seed=21, pairs_per_slice=40)
        a = fit_round(start, target, grid, plan, FAST_KERNEL)
        b = fit_round(start, target, grid, plan, FAST_KERNEL)
        for sa, sb in zip(a.slices, b.slices):
            assert np.array_equal(sa.coefficients, sb.coefficients)
            assert sa.bandwidth == sb.bandwidth

    def test_requires_plan(self):
        start, target = small_clouds(seed=12)
        with pytest.raises(ConfigurationError, match="PairingPlan"):
            fit_round(start, target)
