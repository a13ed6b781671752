"""Declarative experiment configuration.

A run is described by one YAML/JSON document (see ``docs/config-schema.md``
for the commented schema). ``ExperimentConfig.from_dict`` validates the
tree and reports problems with full field paths, e.g.
``refine.checkpoints[2]: must lie strictly inside (0, 1)``.
"""

import os
from dataclasses import dataclass, field as dataclass_field

import numpy as np
import yaml

from .cloud import GaussianMixtureSpec
from .ode import METHOD_EULER, METHOD_RK4, OdeConfig
from .refine import STOP_ABSOLUTE, STOP_RELATIVE, EndPathConfig, GradualConfig
from .solvers import POLICY_RAISE, POLICY_WARN, CgConfig
from .validation import ConfigurationError
from .velocity import BANDWIDTH_FIXED, BANDWIDTH_MEDIAN, KernelConfig

SCHEMA_VERSION = 1

ALGORITHM_ONE_SHOT = "one-shot"
ALGORITHM_END_PATH = "end-path"
ALGORITHM_GRADUAL = "gradual"
_ALGORITHMS = (ALGORITHM_ONE_SHOT, ALGORITHM_END_PATH, ALGORITHM_GRADUAL)

SOURCE_MIXTURE = "mixture"
SOURCE_NORMAL = "standard-normal"
SOURCE_FILE = "file"


def _fail(path, message):
    raise ConfigurationError(f"{path}: {message}")


def _get(mapping, path, key, expected=None, default=None, required=False):
    if key not in mapping or mapping[key] is None:
        if required:
            _fail(f"{path}.{key}" if path else key, "missing required value")
        return default
    value = mapping[key]
    if expected is not None and not isinstance(value, expected):
        names = (expected.__name__ if isinstance(expected, type)
                 else "/".join(t.__name__ for t in expected))
        _fail(f"{path}.{key}" if path else key,
              f"expected {names}, got {type(value).__name__}")
    return value


def _check_keys(mapping, path, allowed):
    for key in mapping:
        if key not in allowed:
            _fail(f"{path}.{key}" if path else key,
                  f"unknown key (allowed: {', '.join(sorted(allowed))})")


def _covariance_from(value, dim, path):
    if isinstance(value, (int, float)):
        if value <= 0:
            _fail(path, "scalar covariance must be > 0")
        return np.eye(dim) * float(value)
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 1:
        if arr.shape[0] != dim:
            _fail(path, f"diagonal covariance needs {dim} entries")
        return np.diag(arr)
    if arr.shape != (dim, dim):
        _fail(path, f"covariance must be {dim}x{dim}")
    return arr


@dataclass(frozen=True)
class CloudSource:
    kind: str
    n: int | None = None
    dim: int | None = None
    mixture: GaussianMixtureSpec | None = None
    path: str | None = None
    file_format: str | None = None

    @classmethod
    def from_dict(cls, data, path):
        _check_keys(data, path, {"kind", "n", "dim", "components", "path",
                                 "format"})
        kind = _get(data, path, "kind", str, required=True)
        if kind == SOURCE_MIXTURE:
            n = _get(data, path, "n", int, required=True)
            if n < 1:
                _fail(f"{path}.n", "must be >= 1")
            raw = _get(data, path, "components", list, required=True)
            weights, means, covs = [], [], []
            dim = None
            for i, comp in enumerate(raw):
                comp_path = f"{path}.components[{i}]"
                if not isinstance(comp, dict):
                    _fail(comp_path, "expected a mapping")
                _check_keys(comp, comp_path, {"weight", "mean", "cov"})
                weight = _get(comp, comp_path, "weight", (int, float),
                              required=True)
                mean = np.asarray(
                    _get(comp, comp_path, "mean", list, required=True),
                    dtype=np.float64)
                if dim is None:
                    dim = mean.shape[0]
                cov = _covariance_from(
                    _get(comp, comp_path, "cov", (int, float, list),
                         required=True),
                    dim, f"{comp_path}.cov")
                weights.append(float(weight))
                means.append(mean)
                covs.append(cov)
            try:
                spec = GaussianMixtureSpec.from_parts(weights, means, covs)
            except ConfigurationError as exc:
                _fail(f"{path}.components", str(exc))
            return cls(kind=kind, n=n, dim=spec.dim, mixture=spec)
        if kind == SOURCE_NORMAL:
            n = _get(data, path, "n", int, required=True)
            dim = _get(data, path, "dim", int, required=True)
            if n < 1:
                _fail(f"{path}.n", "must be >= 1")
            if dim < 1:
                _fail(f"{path}.dim", "must be >= 1")
            return cls(kind=kind, n=n, dim=dim)
        if kind == SOURCE_FILE:
            file_path = _get(data, path, "path", str, required=True)
            if not os.path.exists(file_path):
                _fail(f"{path}.path", f"file not found: {file_path}")
            return cls(kind=kind, path=file_path,
                       dim=_get(data, path, "dim", int),
                       file_format=_get(data, path, "format", str))
        _fail(f"{path}.kind", f"unknown kind {kind!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    algorithm: str
    source: CloudSource
    target: CloudSource
    output_dir: str
    kernel: KernelConfig = dataclass_field(default_factory=KernelConfig)
    cg: CgConfig = dataclass_field(default_factory=CgConfig)
    ode: OdeConfig = dataclass_field(default_factory=OdeConfig)
    n_slices: int = 16
    pairs_per_slice: int | None = None
    max_iterations: int = 20
    stop_mode: str = STOP_RELATIVE
    stop_tolerance: float = 0.02
    n_segments: int = 6
    checkpoints: tuple | None = None
    trajectory_record_every: int = 5
    internal_subset: int | None = 1000
    raw: dict = dataclass_field(default=None, repr=False, compare=False)

    @classmethod
    def from_file(cls, path):
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"{path}: not valid YAML/JSON ({exc})")
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path}: top level must be a mapping")
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data):
        _check_keys(data, "", {
            "schema_version", "seed", "algorithm", "source", "target",
            "output_dir", "kernel", "cg", "ode", "grid", "pairing", "refine",
            "trajectories", "metric",
        })
        version = _get(data, "", "schema_version", int, default=SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            _fail("schema_version", f"unsupported version {version}")
        seed = _get(data, "", "seed", int, default=0)
        algorithm = _get(data, "", "algorithm", str, default=ALGORITHM_END_PATH)
        if algorithm not in _ALGORITHMS:
            _fail("algorithm",
                  f"must be one of {', '.join(_ALGORITHMS)}; got {algorithm!r}")
        source = CloudSource.from_dict(
            _get(data, "", "source", dict, required=True), "source")
        target = CloudSource.from_dict(
            _get(data, "", "target", dict, required=True), "target")
        if target.kind == SOURCE_NORMAL:
            _fail("target.kind", "target must be a mixture or a file")
        output_dir = _get(data, "", "output_dir", str, required=True)

        kernel_raw = _get(data, "", "kernel", dict, default={})
        _check_keys(kernel_raw, "kernel", {
            "bandwidth_mode", "bandwidth_value", "regularization",
            "max_centers"})
        mode = _get(kernel_raw, "kernel", "bandwidth_mode", str,
                    default=BANDWIDTH_MEDIAN)
        if mode not in (BANDWIDTH_MEDIAN, BANDWIDTH_FIXED):
            _fail("kernel.bandwidth_mode", f"unknown mode {mode!r}")
        try:
            kernel = KernelConfig(
                bandwidth_mode=mode,
                bandwidth_value=_get(kernel_raw, "kernel", "bandwidth_value",
                                     (int, float), default=1.0),
                regularization_beta=_get(kernel_raw, "kernel",
                                         "regularization", (int, float),
                                         default=1e-4),
                max_centers=_get(kernel_raw, "kernel", "max_centers", int,
                                 default=512),
            )
        except ConfigurationError as exc:
            _fail("kernel", str(exc))

        cg_raw = _get(data, "", "cg", dict, default={})
        _check_keys(cg_raw, "cg", {"rel_tol", "max_iterations", "on_failure"})
        policy = _get(cg_raw, "cg", "on_failure", str, default=POLICY_WARN)
        if policy not in (POLICY_WARN, POLICY_RAISE):
            _fail("cg.on_failure", f"must be {POLICY_WARN} or {POLICY_RAISE}")
        try:
            cg = CgConfig(
                rel_tol=_get(cg_raw, "cg", "rel_tol", (int, float),
                             default=1e-8),
                max_iterations=_get(cg_raw, "cg", "max_iterations", int),
                on_failure=policy,
            )
        except ValueError as exc:
            _fail("cg", str(exc))

        ode_raw = _get(data, "", "ode", dict, default={})
        _check_keys(ode_raw, "ode", {"method", "num_steps"})
        method = _get(ode_raw, "ode", "method", str, default=METHOD_RK4)
        if method not in (METHOD_EULER, METHOD_RK4):
            _fail("ode.method", f"unknown method {method!r}")
        steps = _get(ode_raw, "ode", "num_steps", int, default=50)
        if steps < 1:
            _fail("ode.num_steps", "must be >= 1")
        ode = OdeConfig(method=method, num_steps=steps)

        grid_raw = _get(data, "", "grid", dict, default={})
        _check_keys(grid_raw, "grid", {"n_slices"})
        n_slices = _get(grid_raw, "grid", "n_slices", int, default=16)
        if n_slices < 1:
            _fail("grid.n_slices", "must be >= 1")

        pairing_raw = _get(data, "", "pairing", dict, default={})
        _check_keys(pairing_raw, "pairing", {"pairs_per_slice"})
        pairs = _get(pairing_raw, "pairing", "pairs_per_slice", int)
        if pairs is not None and pairs < 1:
            _fail("pairing.pairs_per_slice", "must be >= 1")

        refine_raw = _get(data, "", "refine", dict, default={})
        _check_keys(refine_raw, "refine", {
            "max_iterations", "stop_mode", "stop_tolerance", "n_segments",
            "checkpoints"})
        max_iter = _get(refine_raw, "refine", "max_iterations", int,
                        default=20)
        if max_iter < 1:
            _fail("refine.max_iterations", "must be >= 1")
        stop_mode = _get(refine_raw, "refine", "stop_mode", str,
                         default=STOP_RELATIVE)
        if stop_mode not in (STOP_ABSOLUTE, STOP_RELATIVE):
            _fail("refine.stop_mode", f"unknown mode {stop_mode!r}")
        stop_tol = _get(refine_raw, "refine", "stop_tolerance", (int, float),
                        default=0.02)
        if stop_tol < 0:
            _fail("refine.stop_tolerance", "must be >= 0")
        n_segments = _get(refine_raw, "refine", "n_segments", int, default=6)
        if n_segments < 1:
            _fail("refine.n_segments", "must be >= 1")
        checkpoints = _get(refine_raw, "refine", "checkpoints", list)
        if checkpoints is not None:
            values = []
            for i, t in enumerate(checkpoints):
                if not isinstance(t, (int, float)):
                    _fail(f"refine.checkpoints[{i}]", "expected a number")
                if not 0.0 < float(t) < 1.0:
                    _fail(f"refine.checkpoints[{i}]",
                          "must lie strictly inside (0, 1); a checkpoint at "
                          "1 would divide by the vanishing remaining time "
                          "1 - t")
                values.append(float(t))
            if any(b <= a for a, b in zip(values, values[1:])):
                _fail("refine.checkpoints", "must be strictly increasing")
            checkpoints = tuple(values)

        traj_raw = _get(data, "", "trajectories", dict, default={})
        _check_keys(traj_raw, "trajectories", {"record_every"})
        record_every = _get(traj_raw, "trajectories", "record_every", int,
                            default=5)
        if record_every < 0:
            _fail("trajectories.record_every", "must be >= 0 (0 disables)")

        metric_raw = _get(data, "", "metric", dict, default={})
        _check_keys(metric_raw, "metric", {"internal_subset"})
        subset = _get(metric_raw, "metric", "internal_subset", int,
                      default=1000)
        if subset is not None and subset < 1:
            _fail("metric.internal_subset", "must be >= 1")

        return cls(
            seed=seed, algorithm=algorithm, source=source, target=target,
            output_dir=output_dir, kernel=kernel, cg=cg, ode=ode,
            n_slices=n_slices, pairs_per_slice=pairs,
            max_iterations=max_iter, stop_mode=stop_mode,
            stop_tolerance=stop_tol, n_segments=n_segments,
            checkpoints=checkpoints, trajectory_record_every=record_every,
            internal_subset=subset, raw=data,
        )

    def end_path_config(self, max_iterations=None):
        return EndPathConfig(
            seed=self.seed,
            max_outer_iterations=(max_iterations if max_iterations is not None
                                  else self.max_iterations),
            stop_tolerance=self.stop_tolerance,
            stop_mode=self.stop_mode,
            n_slices=self.n_slices,
            pairs_per_slice=self.pairs_per_slice,
            kernel=self.kernel, cg=self.cg, ode=self.ode,
        )

    def gradual_config(self):
        return GradualConfig(
            seed=self.seed,
            checkpoints=self.checkpoints,
            n_segments=self.n_segments,
            n_slices=self.n_slices,
            pairs_per_slice=self.pairs_per_slice,
            kernel=self.kernel, cg=self.cg, ode=self.ode,
        )

    def echo(self):
        """Canonical dict of all resolved settings for the run manifest."""

        def cloud_echo(src):
            out = {"kind": src.kind}
            if src.kind == SOURCE_MIXTURE:
                out["n"] = src.n
                out["components"] = [
                    {
                        "weight": comp.weight,
                        "mean": comp.mean.tolist(),
                        "cov": comp.covariance.tolist(),
                    }
                    for comp in src.mixture.components
                ]
            elif src.kind == SOURCE_NORMAL:
                out["n"] = src.n
                out["dim"] = src.dim
            else:
                out["path"] = src.path
                if src.file_format:
                    out["format"] = src.file_format
                if src.dim is not None:
                    out["dim"] = src.dim
            return out

        return {
            "schema_version": SCHEMA_VERSION,
            "seed": self.seed,
            "algorithm": self.algorithm,
            "source": cloud_echo(self.source),
            "target": cloud_echo(self.target),
            "output_dir": self.output_dir,
            "kernel": {
                "bandwidth_mode": self.kernel.bandwidth_mode,
                "bandwidth_value": self.kernel.bandwidth_value,
                "regularization": self.kernel.regularization_beta,
                "max_centers": self.kernel.max_centers,
            },
            "cg": {
                "rel_tol": self.cg.rel_tol,
                "max_iterations": self.cg.max_iterations,
                "on_failure": self.cg.on_failure,
            },
            "ode": {"method": self.ode.method, "num_steps": self.ode.num_steps},
            "grid": {"n_slices": self.n_slices},
            "pairing": {"pairs_per_slice": self.pairs_per_slice},
            "refine": {
                "max_iterations": self.max_iterations,
                "stop_mode": self.stop_mode,
                "stop_tolerance": self.stop_tolerance,
                "n_segments": self.n_segments,
                "checkpoints": (list(self.checkpoints)
                                if self.checkpoints else None),
            },
            "trajectories": {"record_every": self.trajectory_record_every},
            "metric": {"internal_subset": self.internal_subset},
        }
