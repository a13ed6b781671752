"""scikit-learn style estimators wrapping the transport pipeline.

All three estimators share the signature ``fit(X, y)`` where X is the
source cloud and y the target cloud, both plain (n, d) arrays, and
``transform(points)`` pushes new points through the fitted transport. They
inherit ``get_params``/``set_params`` from BaseEstimator, so they clone and
grid-search like any other transformer.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .cloud import PointCloud
from .flowmatch import PairingPlan, TimeGrid, fit_round, transport
from .metrics import closest_point_cost
from .ode import OdeConfig, integrate
from .refine import (
    EndPathConfig,
    GradualConfig,
    end_path_correct,
    gradual_refine,
    replay_transport,
)
from .solvers import CgConfig
from .velocity import KernelConfig


class _TransportEstimator(TransformerMixin, BaseEstimator):
    """Shared parameter plumbing for the transport estimators."""

    def __init__(self, n_slices=16, pairs_per_slice=None,
                 bandwidth_mode="median-heuristic", bandwidth_value=1.0,
                 regularization=1e-4, max_centers=512,
                 cg_rel_tol=1e-8, cg_max_iterations=None,
                 ode_method="rk4", ode_steps=50, random_state=0):
        self.n_slices = n_slices
        self.pairs_per_slice = pairs_per_slice
        self.bandwidth_mode = bandwidth_mode
        self.bandwidth_value = bandwidth_value
        self.regularization = regularization
        self.max_centers = max_centers
        self.cg_rel_tol = cg_rel_tol
        self.cg_max_iterations = cg_max_iterations
        self.ode_method = ode_method
        self.ode_steps = ode_steps
        self.random_state = random_state

    def _kernel_config(self):
        return KernelConfig(
            bandwidth_mode=self.bandwidth_mode,
            bandwidth_value=self.bandwidth_value,
            regularization_beta=self.regularization,
            max_centers=self.max_centers,
        )

    def _cg_config(self):
        return CgConfig(rel_tol=self.cg_rel_tol,
                        max_iterations=self.cg_max_iterations)

    def _ode_config(self):
        return OdeConfig(method=self.ode_method, num_steps=self.ode_steps)

    def _clouds(self, X, y):
        if y is None:
            raise ValueError("fit requires a target cloud as y")
        source = PointCloud(np.asarray(X, dtype=np.float64), label="source")
        target = PointCloud(np.asarray(y, dtype=np.float64), label="target")
        if source.dim != target.dim:
            raise ValueError(
                f"source has d={source.dim} but target has d={target.dim}"
            )
        self.n_features_in_ = source.dim
        return source, target

    def _check_transform_input(self, X):
        check_is_fitted(self)
        pts = np.asarray(X, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != self.n_features_in_:
            raise ValueError(
                f"expected shape (n, {self.n_features_in_}), got {pts.shape}"
            )
        return pts


class FlowMatcher(_TransportEstimator):
    """One-shot flow-matching transport.

    fit(X, y) learns an RBF velocity field on straight interpolation paths
    between the source X and target y; transform(points) integrates the
    field to push points toward the target distribution.

    Attributes
    ----------
    field_ : RbfVelocityField
        The fitted per-slice velocity model.
    cost_ : float
        Transport cost of fit_transform's output against y (set by fit).
    """

    def fit(self, X, y=None):
        source, target = self._clouds(X, y)
        plan = PairingPlan(self.random_state, self.pairs_per_slice)
        self.field_ = fit_round(
            source, target, TimeGrid.uniform(self.n_slices), plan,
            self._kernel_config(), self._cg_config(),
        )
        transported = transport(source, self.field_, self._ode_config())
        self.cost_ = closest_point_cost(transported, target).value
        return self

    def transform(self, X):
        pts = self._check_transform_input(X)
        final, _ = integrate(self.field_, pts, self._ode_config())
        return final


class EndPathCorrector(_TransportEstimator):
    """Iterative end-path correction.

    fit(X, y) runs repeated flow-matching rounds, each restarting from the
    previous round's transported cloud, until the transport cost stops
    improving or the round cap is reached. transform(points) replays the
    stored per-round fields in order.

    Attributes
    ----------
    trace_ : RefinementTrace
        Full iterate/cost/diagnostic record of the fit.
    costs_ : list of float
        Transport cost per iterate, starting with the initial cloud.
    n_iter_ : int
        Number of correction rounds actually run.
    termination_reason_ : str
        "converged" or "cap".
    """

    def __init__(self, n_slices=16, pairs_per_slice=None,
                 bandwidth_mode="median-heuristic", bandwidth_value=1.0,
                 regularization=1e-4, max_centers=512,
                 cg_rel_tol=1e-8, cg_max_iterations=None,
                 ode_method="rk4", ode_steps=50, random_state=0,
                 max_iterations=20, stop_tolerance=0.02,
                 stop_mode="relative-change"):
        super().__init__(
            n_slices=n_slices, pairs_per_slice=pairs_per_slice,
            bandwidth_mode=bandwidth_mode, bandwidth_value=bandwidth_value,
            regularization=regularization, max_centers=max_centers,
            cg_rel_tol=cg_rel_tol, cg_max_iterations=cg_max_iterations,
            ode_method=ode_method, ode_steps=ode_steps,
            random_state=random_state,
        )
        self.max_iterations = max_iterations
        self.stop_tolerance = stop_tolerance
        self.stop_mode = stop_mode

    def _refine_config(self):
        return EndPathConfig(
            seed=self.random_state,
            max_outer_iterations=self.max_iterations,
            stop_tolerance=self.stop_tolerance,
            stop_mode=self.stop_mode,
            n_slices=self.n_slices,
            pairs_per_slice=self.pairs_per_slice,
            kernel=self._kernel_config(),
            cg=self._cg_config(),
            ode=self._ode_config(),
        )

    def fit(self, X, y=None):
        source, target = self._clouds(X, y)
        self.trace_ = end_path_correct(source, target, self._refine_config())
        self.costs_ = self.trace_.costs
        self.n_iter_ = len(self.trace_.stages)
        self.termination_reason_ = self.trace_.termination_reason
        return self

    def transform(self, X):
        pts = self._check_transform_input(X)
        return replay_transport(self.trace_, pts)


class GradualRefiner(_TransportEstimator):
    """Segment-wise gradual refinement.

    fit(X, y) splits [0, 1] into segments, re-bases the interpolation path
    on the integrated state at each checkpoint, and fits one field per
    segment. transform(points) replays the stored segment fields.

    Attributes
    ----------
    trace_ : RefinementTrace
    costs_ : list of float
    """

    def __init__(self, n_slices=16, pairs_per_slice=None,
                 bandwidth_mode="median-heuristic", bandwidth_value=1.0,
                 regularization=1e-4, max_centers=512,
                 cg_rel_tol=1e-8, cg_max_iterations=None,
                 ode_method="rk4", ode_steps=50, random_state=0,
                 n_segments=6, checkpoints=None):
        super().__init__(
            n_slices=n_slices, pairs_per_slice=pairs_per_slice,
            bandwidth_mode=bandwidth_mode, bandwidth_value=bandwidth_value,
            regularization=regularization, max_centers=max_centers,
            cg_rel_tol=cg_rel_tol, cg_max_iterations=cg_max_iterations,
            ode_method=ode_method, ode_steps=ode_steps,
            random_state=random_state,
        )
        self.n_segments = n_segments
        self.checkpoints = checkpoints

    def _refine_config(self):
        return GradualConfig(
            seed=self.random_state,
            checkpoints=(tuple(self.checkpoints)
                         if self.checkpoints is not None else None),
            n_segments=self.n_segments,
            n_slices=self.n_slices,
            pairs_per_slice=self.pairs_per_slice,
            kernel=self._kernel_config(),
            cg=self._cg_config(),
            ode=self._ode_config(),
        )

    def fit(self, X, y=None):
        source, target = self._clouds(X, y)
        self.trace_ = gradual_refine(source, target, self._refine_config())
        self.costs_ = self.trace_.costs
        return self

    def transform(self, X):
        pts = self._check_transform_input(X)
        return replay_transport(self.trace_, pts)
