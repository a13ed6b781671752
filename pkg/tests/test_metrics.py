import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowrefine import (
    ConfigurationError,
    PointCloud,
    closest_point_cost,
    internal_similarity,
)
from flowrefine.metrics import _nearest_sq_dists_brute, _nearest_sq_dists_kdtree


class TestClosestPointCost:
    def test_identical_clouds_zero(self):
        pts = np.random.default_rng(0).standard_normal((30, 3))
        assert closest_point_cost(pts, pts).value == 0.0

    def test_hand_value_single_points(self):
        report = closest_point_cost(np.array([[0.0, 0.0]]),
                                    np.array([[3.0, 4.0]]))
        assert report.value == 25.0
        assert report.a_to_b_sum == 25.0 and report.b_to_a_sum == 25.0

    def test_hand_value_unequal_sizes(self):
        a = np.array([[0.0], [1.0]])
        b = np.array([[0.0], [1.0], [10.0]])
        report = closest_point_cost(a, b)
        assert report.a_to_b_sum == 0.0
        assert report.b_to_a_sum == 81.0
        assert report.denominator_n == 3
        assert report.value == 13.5

    def test_symmetry_exact(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((25, 2))
        b = rng.standard_normal((40, 2))
        assert closest_point_cost(a, b).value == closest_point_cost(b, a).value

    def test_translation_sensitivity(self):
        pts = np.random.default_rng(2).standard_normal((50, 2))
        shifted = pts + np.array([0.5, 0.0])
        assert closest_point_cost(pts, shifted).value > 0.0

    def test_accepts_point_clouds(self):
        cloud = PointCloud(np.ones((3, 2)))
        assert closest_point_cost(cloud, cloud).value == 0.0

    def test_dim_mismatch(self):
        with pytest.raises(ConfigurationError):
            closest_point_cost(np.ones((2, 2)), np.ones((2, 3)))

    def test_accelerated_path_matches_brute_force(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n_a = int(rng.integers(2, 80))
            n_b = int(rng.integers(2, 80))
            d = int(rng.integers(1, 6))
            a = rng.standard_normal((n_a, d)) * rng.uniform(0.1, 10)
            b = rng.standard_normal((n_b, d)) * rng.uniform(0.1, 10)
            brute = _nearest_sq_dists_brute(a, b)
            tree = _nearest_sq_dists_kdtree(a, b)
            assert np.allclose(brute, tree, rtol=1e-12, atol=1e-12)

    def test_large_input_uses_tree_and_matches(self):
        rng = np.random.default_rng(4)
        a = rng.standard_normal((2100, 2))
        b = rng.standard_normal((2100, 2))
        fast = closest_point_cost(a, b, accelerate=True)
        brute = closest_point_cost(a, b, accelerate=False)
        assert abs(fast.value - brute.value) <= 1e-12 * max(1.0, brute.value)

    @given(st.integers(min_value=1, max_value=20),
           st.integers(min_value=1, max_value=20),
           st.integers(min_value=1, max_value=3),
           st.integers(min_value=0, max_value=2**31))
    @settings(max_examples=30, deadline=None)
    def test_symmetry_and_nonnegativity_property(self, n_a, n_b, d, seed):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((n_a, d))
        b = rng.standard_normal((n_b, d))
        forward = closest_point_cost(a, b)
        backward = closest_point_cost(b, a)
        assert forward.value == backward.value
        assert forward.value >= 0.0


class TestInternalSimilarity:
    def test_identical_copies_zero(self):
        cloud = np.tile(np.array([[2.0, -1.0]]), (20, 1))
        assert internal_similarity(cloud, 10, seed=0).value == 0.0

    def test_deterministic(self):
        pts = np.random.default_rng(5).standard_normal((200, 2))
        a = internal_similarity(pts, 100, seed=7)
        b = internal_similarity(pts, 100, seed=7)
        assert a.value == b.value

    def test_seed_changes_split(self):
        pts = np.random.default_rng(6).standard_normal((200, 2))
        a = internal_similarity(pts, 100, seed=1)
        b = internal_similarity(pts, 100, seed=2)
        assert a.value != b.value

    def test_insufficient_points(self):
        with pytest.raises(ConfigurationError, match="disjoint"):
            internal_similarity(np.ones((10, 2)), 6, seed=0)
