"""Conjugate gradient for dense symmetric positive definite systems.

Solves A X = B column-block-wise: every right-hand-side column gets its own
step sizes, and columns are frozen as soon as their relative residual drops
below tolerance so late iterations cannot corrupt converged columns.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .validation import SolverError

POLICY_WARN = "warn"
POLICY_RAISE = "raise"


@dataclass(frozen=True)
class CgConfig:
    """Solver tolerances. max_iterations=None means 10 * n_rows."""

    rel_tol: float = 1e-8
    max_iterations: int | None = None
    on_failure: str = POLICY_WARN

    def __post_init__(self):
        if self.rel_tol <= 0:
            raise ValueError(f"rel_tol must be > 0, got {self.rel_tol}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1 when given")
        if self.on_failure not in (POLICY_WARN, POLICY_RAISE):
            raise ValueError(f"unknown failure policy {self.on_failure!r}")

    def resolve_max_iterations(self, n):
        return self.max_iterations if self.max_iterations is not None else 10 * n


@dataclass(frozen=True)
class CgDiagnostics:
    iterations: int
    final_relative_residual: float
    converged: bool
    # Smallest curvature p'Ap observed across active columns; > 0 for an
    # SPD system, so a non-positive value flags a broken matrix.
    min_curvature: float


def conjugate_gradient(matrix, rhs, config=CgConfig()):
    """Solve matrix @ X = rhs for SPD `matrix`; returns (X, CgDiagnostics).

    `rhs` may be a vector or an (n, k) block of right-hand sides. Zero
    columns converge immediately to zero solutions.
    """
    A = np.asarray(matrix, dtype=np.float64)
    B = np.asarray(rhs, dtype=np.float64)
    squeeze = B.ndim == 1
    if squeeze:
        B = B[:, None]
    n = A.shape[0]
    if A.shape != (n, n) or B.shape[0] != n:
        raise ValueError(f"shape mismatch: A {A.shape}, B {B.shape}")

    max_iter = config.resolve_max_iterations(n)
    X = np.zeros_like(B)
    R = B.copy()
    P = R.copy()
    b_norm = np.linalg.norm(B, axis=0)
    scale = np.where(b_norm > 0, b_norm, 1.0)
    r_sq = np.einsum("ij,ij->j", R, R)
    active = np.sqrt(r_sq) / scale > config.rel_tol
    min_curvature = np.inf
    iterations = 0

    while iterations < max_iter and active.any():
        AP = A @ P
        curvature = np.einsum("ij,ij->j", P, AP)
        live = active & (curvature > 0)
        if active.any():
            worst = curvature[active].min()
            if worst < min_curvature:
                min_curvature = float(worst)
        if not live.any():
            break  # breakdown: no positive-curvature direction left
        alpha = np.where(live, r_sq / np.where(live, curvature, 1.0), 0.0)
        X += alpha * P
        R -= alpha * AP
        r_sq_new = np.einsum("ij,ij->j", R, R)
        beta = np.where(live, r_sq_new / np.where(r_sq > 0, r_sq, 1.0), 0.0)
        P = R + beta * P
        r_sq = r_sq_new
        active = live & (np.sqrt(r_sq) / scale > config.rel_tol)
        iterations += 1

    final_rel = float(np.max(np.sqrt(r_sq) / scale))
    converged = final_rel <= config.rel_tol
    if min_curvature is np.inf:
        min_curvature = float("nan")  # no iterations ran (zero rhs)
    diagnostics = CgDiagnostics(iterations, final_rel, converged, min_curvature)
    if not converged:
        message = (
            f"CG did not converge: relative residual {final_rel:.3e} "
            f"after {iterations} iterations (tol {config.rel_tol:.1e})"
        )
        if config.on_failure == POLICY_RAISE:
            raise SolverError(message)
        warnings.warn(message, RuntimeWarning, stacklevel=2)
    return (X[:, 0] if squeeze else X), diagnostics
