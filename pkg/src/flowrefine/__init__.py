"""flowrefine: iterative flow-matching transport between point clouds.

Submodules are imported lazily so that the command-line entry point can
configure BLAS thread counts before numpy loads.
"""

import importlib

__version__ = "0.1.0"

_EXPORTS = {
    # cloud data + samplers + I/O
    "PointCloud": "cloud",
    "GaussianMixtureSpec": "cloud",
    "MixtureComponent": "cloud",
    "sample_gaussian_mixture": "cloud",
    "sample_standard_normal": "cloud",
    "load_cloud": "cloud",
    "save_cloud": "cloud",
    # RBF velocity model
    "KernelConfig": "velocity",
    "SliceModel": "velocity",
    "RbfVelocityField": "velocity",
    "assemble_kernel_matrix": "velocity",
    "fit_slice": "velocity",
    "evaluate_field": "velocity",
    "median_heuristic_bandwidth": "velocity",
    "save_field": "velocity",
    "load_field": "velocity",
    # linear solver
    "CgConfig": "solvers",
    "CgDiagnostics": "solvers",
    "conjugate_gradient": "solvers",
    # integrators
    "OdeConfig": "ode",
    "TrajectoryRecord": "ode",
    "integrate": "ode",
    "convergence_order": "ode",
    "EXACT_ORDER": "ode",
    # flow matching rounds
    "TimeGrid": "flowmatch",
    "PairingPlan": "flowmatch",
    "HomotopyBatch": "flowmatch",
    "build_homotopy_batch": "flowmatch",
    "build_corrected_batch": "flowmatch",
    "recompute_batch": "flowmatch",
    "fit_round": "flowmatch",
    "fit_segment": "flowmatch",
    "transport": "flowmatch",
    # iterative drivers
    "EndPathConfig": "refine",
    "GradualConfig": "refine",
    "RefinementTrace": "refine",
    "end_path_correct": "refine",
    "gradual_refine": "refine",
    "stop_check": "refine",
    "replay_transport": "refine",
    # metrics
    "CostReport": "metrics",
    "closest_point_cost": "metrics",
    "internal_similarity": "metrics",
    # sklearn-style estimators
    "FlowMatcher": "estimators",
    "EndPathCorrector": "estimators",
    "GradualRefiner": "estimators",
    # experiment harness
    "ExperimentConfig": "config",
    "run_experiment": "runner",
    "RunResult": "runner",
    # errors
    "ConfigurationError": "validation",
    "CloudFormatError": "validation",
    "IntegrationError": "validation",
    "SolverError": "validation",
}

__all__ = sorted(_EXPORTS) + ["__version__"]


def __getattr__(name):
    if name in _EXPORTS:
        module = importlib.import_module(f".{_EXPORTS[name]}", __name__)
        value = getattr(module, name)
        globals()[name] = value
        return value
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return __all__
