import math

import numpy as np
import pytest

from flowrefine import (
    EXACT_ORDER,
    IntegrationError,
    KernelConfig,
    OdeConfig,
    PointCloud,
    RbfVelocityField,
    convergence_order,
    fit_slice,
    integrate,
)


def constant_field(c):
    return lambda points, t: np.broadcast_to(c, points.shape).copy()


def linear_field(points, t):
    return points


def rbf_test_field(seed=0, n_slices=3):
    rng = np.random.default_rng(seed)
    config = KernelConfig(bandwidth_mode="fixed", bandwidth_value=1.0,
                          regularization_beta=1e-6, max_centers=None)
    slices = tuple(
        fit_slice(rng.standard_normal((10, 2)), rng.standard_normal((10, 2)),
                  t, config)
        for t in np.linspace(0.0, 1.0, n_slices)
    )
    return RbfVelocityField(slices, config)


class TestIntegrate:
    def test_constant_field_exact_when_steps_divide(self):
        start = np.array([[0.0, 0.0], [1.0, -1.0]])
        c = np.array([1.5, -0.25])
        for method in ("euler", "rk4"):
            cfg = OdeConfig(method=method, num_steps=64)
            final, _ = integrate(constant_field(c), start, cfg)
            assert np.allclose(final, start + c, rtol=0, atol=1e-14)

    def test_constant_field_euler_bitwise(self):
        start = np.zeros((1, 2))
        cfg = OdeConfig(method="euler", num_steps=64)
        final, _ = integrate(constant_field(np.array([1.0, 2.0])), start, cfg)
        assert np.array_equal(final, np.array([[1.0, 2.0]]))

    def test_zero_field_identity_bitwise(self):
        rng = np.random.default_rng(0)
        start = rng.standard_normal((30, 3))
        for method in ("euler", "rk4"):
            final, _ = integrate(constant_field(np.zeros(3)), start,
                                 OdeConfig(method=method, num_steps=13))
            assert np.array_equal(final, start)

    def test_linear_field_matches_exponential(self):
        start = np.array([[1.0, -2.0]])
        final, _ = integrate(linear_field, start, OdeConfig(num_steps=50))
        assert np.allclose(final, start * math.e, rtol=1e-7)

    def test_deterministic(self):
        field = rbf_test_field()
        start = np.random.default_rng(1).standard_normal((20, 2))
        cfg = OdeConfig(num_steps=10)
        a, _ = integrate(field, start, cfg)
        b, _ = integrate(field, start, cfg)
        assert np.array_equal(a, b)

    def test_point_independence(self):
        field = rbf_test_field(seed=2)
        start = np.random.default_rng(2).standard_normal((8, 2))
        cfg = OdeConfig(num_steps=7)
        batch, _ = integrate(field, start, cfg)
        singles = np.vstack([integrate(field, start[i:i + 1], cfg)[0]
                             for i in range(8)])
        assert np.array_equal(batch, singles)

    def test_subinterval_composition_bitwise(self):
        field = rbf_test_field(seed=3)
        start = np.random.default_rng(3).standard_normal((12, 2))
        whole, _ = integrate(field, start, OdeConfig(num_steps=50))
        half1, _ = integrate(field, start,
                             OdeConfig(num_steps=25, t_start=0.0, t_end=0.5))
        half2, _ = integrate(field, half1,
                             OdeConfig(num_steps=25, t_start=0.5, t_end=1.0))
        assert np.array_equal(whole, half2)

    def test_cloud_in_cloud_out(self):
        cloud = PointCloud(np.zeros((4, 2)), label="walkers")
        final, _ = integrate(constant_field(np.ones(2)), cloud,
                             OdeConfig(num_steps=4))
        assert isinstance(final, PointCloud)
        assert final.label == "walkers"

    def test_nonfinite_abort_names_step_and_point(self):
        def exploding(points, t):
            out = np.zeros_like(points)
            if t >= 0.5:
                out[2] = np.inf
            return out

        with pytest.raises(IntegrationError) as err:
            integrate(exploding, np.zeros((5, 2)),
                      OdeConfig(method="euler", num_steps=10))
        assert err.value.point_index == 2
        assert 0 <= err.value.step_index < 10

    def test_record_every_snapshots(self):
        start = np.zeros((3, 2))
        final, record = integrate(constant_field(np.ones(2)), start,
                                  OdeConfig(method="euler", num_steps=10),
                                  record_every=4)
        assert record.times[0] == 0.0
        assert record.times[-1] == 1.0
        assert all(b > a for a, b in zip(record.times, record.times[1:]))
        assert np.array_equal(record.states[-1], final)

    def test_invalid_config(self):
        from flowrefine import ConfigurationError
        with pytest.raises(ConfigurationError):
            OdeConfig(num_steps=0)
        with pytest.raises(ConfigurationError):
            OdeConfig(t_start=1.0, t_end=0.5)
        with pytest.raises(ConfigurationError):
            OdeConfig(method="rk5")


class TestConvergenceOrder:
    def exact_exponential(self, points, t_start, t_end):
        return points * math.exp(t_end - t_start)

    def test_euler_is_first_order(self):
        start = np.array([[1.0], [2.0], [-0.5]])
        slope = convergence_order(linear_field, self.exact_exponential,
                                  start, 0.0, 1.0, "euler",
                                  [50, 100, 200, 400])
        assert 0.9 <= slope <= 1.1

    def test_rk4_is_fourth_order(self):
        start = np.array([[1.0], [2.0], [-0.5]])
        slope = convergence_order(linear_field, self.exact_exponential,
                                  start, 0.0, 1.0, "rk4", [5, 10, 20, 40])
        assert 3.7 <= slope <= 4.3

    def test_constant_field_reports_exact(self):
        c = np.array([2.0, -1.0])

        def exact(points, t_start, t_end):
            return points + (t_end - t_start) * c

        slope = convergence_order(constant_field(c), exact,
                                  np.zeros((2, 2)), 0.0, 1.0, "rk4",
                                  [8, 16, 32])
        assert slope == EXACT_ORDER
