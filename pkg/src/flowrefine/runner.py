"""Execute one configured experiment and write its artifact tree.

Output layout under config.output_dir:

    manifest.json          deterministic run record (see manifest.py)
    timings.json           volatile wall-clock sidecar
    metrics.csv            iteration, label, cost, direction sums
    clouds/                packed-binary cloud per iterate (+ source/target)
    trajectories/          2-D only: CSV cloud snapshot per recorded time
                           of the first transport stage
"""

import os
import time
from dataclasses import dataclass

from .cloud import load_cloud, sample_gaussian_mixture, sample_standard_normal, save_cloud
from .config import (
    ALGORITHM_END_PATH,
    ALGORITHM_GRADUAL,
    ALGORITHM_ONE_SHOT,
    SOURCE_FILE,
    SOURCE_MIXTURE,
)
from .manifest import (
    METRICS_NAME,
    MANIFEST_NAME,
    TIMINGS_NAME,
    build_manifest,
    write_manifest,
    write_metrics_csv,
    write_timings,
)
from .metrics import internal_similarity
from .ode import OdeConfig, integrate
from .refine import end_path_correct, gradual_refine
from .seeding import child_seed
from .validation import ConfigurationError

_SEED_SOURCE = 100
_SEED_TARGET = 101
_SEED_FLOOR = 102


@dataclass(frozen=True)
class RunResult:
    output_dir: str
    manifest: dict
    trace: object


def _materialize(source, seed, label):
    if source.kind == SOURCE_MIXTURE:
        return sample_gaussian_mixture(source.mixture, source.n, seed,
                                       label=label)
    if source.kind == SOURCE_FILE:
        cloud = load_cloud(source.path, source.file_format, label=label)
        if source.dim is not None and cloud.dim != source.dim:
            raise ConfigurationError(
                f"{label}.path: {source.path} has d={cloud.dim}, "
                f"expected d={source.dim}"
            )
        return cloud
    return sample_standard_normal(source.dim, source.n, seed, label=label)


def _write_trajectories(trace, start, out_dir, record_every):
    """Snapshot CSVs of the first stored transport stage (the initial
    transport), one file per recorded time."""
    stage = trace.stages[0]
    cfg = OdeConfig(method=stage.method, num_steps=stage.num_steps,
                    t_start=stage.t_start, t_end=stage.t_end)
    _, record = integrate(stage.field, start, cfg, record_every=record_every)
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for t, state in zip(record.times, record.states):
        name = f"stage1_t{t:.6f}.csv"
        save_cloud(state, os.path.join(out_dir, name), "csv")
        written.append(name)
    return written


def run_experiment(config):
    """Run the configured algorithm and write all artifacts.

    Validation problems raise ConfigurationError before anything is
    written; failures during the run still produce a manifest with
    status="failed" and the error message.
    """
    source = _materialize(config.source, child_seed(config.seed, _SEED_SOURCE),
                          "source")
    target = _materialize(config.target, child_seed(config.seed, _SEED_TARGET),
                          "target")
    if source.dim != target.dim:
        raise ConfigurationError(
            f"source has d={source.dim} but target has d={target.dim}"
        )

    out = config.output_dir
    clouds_dir = os.path.join(out, "clouds")
    os.makedirs(clouds_dir, exist_ok=True)

    began = time.perf_counter()
    try:
        if config.algorithm == ALGORITHM_END_PATH:
            trace = end_path_correct(source, target, config.end_path_config())
        elif config.algorithm == ALGORITHM_ONE_SHOT:
            trace = end_path_correct(source, target,
                                     config.end_path_config(max_iterations=1))
        elif config.algorithm == ALGORITHM_GRADUAL:
            trace = gradual_refine(source, target, config.gradual_config())
        else:
            raise ConfigurationError(f"unknown algorithm {config.algorithm!r}")
    except Exception as exc:
        manifest = build_manifest(
            config.echo(), config.algorithm, [], "failed",
            {"count": source.count, "dim": source.dim},
            {"count": target.count, "dim": target.dim},
            {}, status="failed", error=f"{type(exc).__name__}: {exc}",
        )
        write_manifest(manifest, os.path.join(out, MANIFEST_NAME))
        raise
    total_wall = time.perf_counter() - began

    save_cloud(source, os.path.join(clouds_dir, "source.bin"))
    save_cloud(target, os.path.join(clouds_dir, "target.bin"))
    iteration_rows = []
    iteration_records = []
    for index, it in enumerate(trace.iterates):
        cloud_name = f"iterate_{index:03d}_{it.label}.bin"
        save_cloud(it.cloud, os.path.join(clouds_dir, cloud_name))
        iteration_rows.append((index, it.label, it.cost))
        iteration_records.append({
            "index": index,
            "label": it.label,
            "cost": it.cost.value,
            "a_to_b_sum": it.cost.a_to_b_sum,
            "b_to_a_sum": it.cost.b_to_a_sum,
            "cloud_file": f"clouds/{cloud_name}",
            "solver": it.diagnostics,
        })
    write_metrics_csv(iteration_rows, os.path.join(out, METRICS_NAME))

    floor = None
    if config.internal_subset and 2 * config.internal_subset <= target.count:
        report = internal_similarity(target, config.internal_subset,
                                     child_seed(config.seed, _SEED_FLOOR))
        floor = {"subset_size": config.internal_subset, "value": report.value}

    trajectory_files = None
    if config.trajectory_record_every and source.dim == 2 and trace.stages:
        trajectory_files = _write_trajectories(
            trace, source, os.path.join(out, "trajectories"),
            config.trajectory_record_every,
        )

    files = {
        "metrics_csv": METRICS_NAME,
        "timings": TIMINGS_NAME,
        "clouds_dir": "clouds",
        "trajectories": trajectory_files,
    }
    manifest = build_manifest(
        config.echo(), config.algorithm, iteration_records,
        trace.termination_reason,
        {"count": source.count, "dim": source.dim, "file": "clouds/source.bin"},
        {"count": target.count, "dim": target.dim, "file": "clouds/target.bin"},
        files, internal_similarity=floor,
    )
    write_manifest(manifest, os.path.join(out, MANIFEST_NAME))
    write_timings(
        {
            "total_seconds": total_wall,
            "per_iterate_seconds": [it.wall_time for it in trace.iterates],
        },
        os.path.join(out, TIMINGS_NAME),
    )
    return RunResult(out, manifest, trace)
