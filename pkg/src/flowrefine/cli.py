"""Command-line interface.

Subcommands: run (execute a config or preset), metric (transport cost
between two cloud files), sample (write a synthetic cloud), inspect
(summarize a run manifest).

Exit codes: 0 success, 1 runtime failure, 2 validation failure.

FLOWREFINE_NUM_THREADS caps the BLAS thread pool; it must take effect
before numpy loads, which is why all library imports below live inside the
command handlers.
"""

import argparse
import json
import os
import sys

_threads = os.environ.get("FLOWREFINE_NUM_THREADS")
if _threads:
    for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, _threads)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="flowrefine",
        description="Iterative flow-matching transport between point clouds.",
    )
    from . import __version__
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config or preset")
    group = run.add_mutually_exclusive_group(required=True)
    group.add_argument("--config", help="YAML/JSON experiment config file")
    group.add_argument("--preset", help="named experiment preset")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--output-dir", help="override the output directory")
    run.add_argument("--source-file", help="use this cloud file as the source")
    run.add_argument("--target-file", help="use this cloud file as the target")

    metric = sub.add_parser(
        "metric", help="closest-point transport cost between two cloud files")
    metric.add_argument("cloud_a")
    metric.add_argument("cloud_b")

    sample = sub.add_parser("sample", help="sample a synthetic cloud to a file")
    spec = sample.add_mutually_exclusive_group(required=True)
    spec.add_argument("--preset", help="named cloud preset")
    spec.add_argument("--mixture-json",
                      help='inline mixture spec, e.g. \'{"components": '
                           '[{"weight": 1.0, "mean": [0, 0], "cov": 1.0}]}\'')
    spec.add_argument("--standard-normal", type=int, metavar="DIM",
                      help="standard normal in DIM dimensions")
    sample.add_argument("--n", type=int, required=True, help="points to draw")
    sample.add_argument("--seed", type=int, default=0)
    sample.add_argument("--out", required=True, help="output file path")
    sample.add_argument("--format", choices=["csv", "packed-binary"],
                        help="default: by file extension (.csv or binary)")

    inspect = sub.add_parser("inspect", help="summarize a run manifest")
    inspect.add_argument("manifest", help="path to manifest.json")
    return parser


def _validation_errors():
    from .validation import CloudFormatError, ConfigurationError
    return (ConfigurationError, CloudFormatError, FileNotFoundError,
            IsADirectoryError, PermissionError)


def _cmd_run(args):
    import yaml

    from .config import ExperimentConfig
    from .presets import experiment_preset
    from .runner import run_experiment
    from .manifest import MANIFEST_NAME

    from .validation import ConfigurationError

    if args.preset:
        data = experiment_preset(args.preset)
    else:
        with open(args.config, "r", encoding="utf-8") as fh:
            try:
                data = yaml.safe_load(fh)
            except yaml.YAMLError as exc:
                raise ConfigurationError(
                    f"{args.config}: not valid YAML/JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigurationError(
                f"{args.config}: top level must be a mapping")
    if args.seed is not None:
        data["seed"] = args.seed
    if args.output_dir is not None:
        data["output_dir"] = args.output_dir
    for key, override in (("source", args.source_file),
                          ("target", args.target_file)):
        if override is not None:
            entry = data.get(key) or {}
            if entry.get("kind") == "file":
                entry["path"] = override
            else:
                entry = {"kind": "file", "path": override}
            data[key] = entry

    config = ExperimentConfig.from_dict(data)
    result = run_experiment(config)
    costs = [it["cost"] for it in result.manifest["iterations"]]
    print(f"{config.algorithm}: {len(costs) - 1} transport stage(s), "
          f"cost {costs[0]:.6g} -> {costs[-1]:.6g} "
          f"[{result.manifest['termination_reason']}]")
    print(os.path.join(result.output_dir, MANIFEST_NAME))
    return EXIT_OK


def _cmd_metric(args):
    from .cloud import load_cloud
    from .metrics import closest_point_cost

    report = closest_point_cost(load_cloud(args.cloud_a),
                                load_cloud(args.cloud_b))
    print(json.dumps(report.as_dict(), sort_keys=True, indent=2))
    return EXIT_OK


def _cmd_sample(args):
    from .cloud import save_cloud, sample_gaussian_mixture, sample_standard_normal
    from .config import CloudSource
    from .presets import cloud_preset_spec
    from .validation import ConfigurationError

    if args.n < 1:
        raise ConfigurationError(f"--n must be >= 1, got {args.n}")
    if args.standard_normal is not None:
        cloud = sample_standard_normal(args.standard_normal, args.n, args.seed)
    else:
        if args.preset:
            spec = cloud_preset_spec(args.preset)
        else:
            try:
                raw = json.loads(args.mixture_json)
            except json.JSONDecodeError as exc:
                raise ConfigurationError(f"--mixture-json: {exc}") from None
            source = CloudSource.from_dict(
                {"kind": "mixture", "n": args.n, **raw}, "mixture-json")
            spec = source.mixture
        cloud = sample_gaussian_mixture(spec, args.n, args.seed)
    save_cloud(cloud, args.out, args.format)
    print(f"wrote {cloud.count} points (d={cloud.dim}) to {args.out}")
    return EXIT_OK


def _cmd_inspect(args):
    from .manifest import read_manifest, summarize_manifest

    print(summarize_manifest(read_manifest(args.manifest)))
    return EXIT_OK


def main(argv=None):
    args = _build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "metric": _cmd_metric,
        "sample": _cmd_sample,
        "inspect": _cmd_inspect,
    }
    try:
        return handlers[args.command](args)
    except _validation_errors() as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except json.JSONDecodeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # runtime failure
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
