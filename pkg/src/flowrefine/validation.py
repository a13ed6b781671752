"""Shared argument checks and the package's error types."""

import numpy as np


class ConfigurationError(ValueError):
    """A config value (file, spec, or constructor argument) is invalid."""


class CloudFormatError(ValueError):
    """A cloud file could not be parsed into a valid point matrix."""


class IntegrationError(RuntimeError):
    """The ODE state became non-finite mid-integration."""

    def __init__(self, step_index, point_index):
        self.step_index = step_index
        self.point_index = point_index
        super().__init__(
            f"non-finite state at step {step_index}, point {point_index}"
        )


class SolverError(RuntimeError):
    """An iterative solve failed and the failure policy is 'raise'."""


def as_points_matrix(values, name="points"):
    """Coerce to a C-contiguous float64 (n, d) matrix and validate it."""
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ConfigurationError(f"{name}: expected a 2-D array, got ndim={arr.ndim}")
    n, d = arr.shape
    if n < 1 or d < 1:
        raise ConfigurationError(f"{name}: empty matrix (shape {arr.shape})")
    if not np.isfinite(arr).all():
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise ConfigurationError(
            f"{name}: non-finite value at row {bad[0]}, column {bad[1]}"
        )
    return arr


def check_same_dim(a, b, name_a="first cloud", name_b="second cloud"):
    if a.shape[1] != b.shape[1]:
        raise ConfigurationError(
            f"dimension mismatch: {name_a} has d={a.shape[1]}, "
            f"{name_b} has d={b.shape[1]}"
        )


def check_positive(value, name):
    if not value > 0:
        raise ConfigurationError(f"{name} must be > 0, got {value}")


def check_nonnegative(value, name):
    if value < 0:
        raise ConfigurationError(f"{name} must be >= 0, got {value}")
