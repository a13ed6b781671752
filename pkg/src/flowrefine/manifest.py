"""Run manifests and plot-ready CSV outputs.

The manifest contains everything needed to reproduce a run (config echo,
seeds, PRNG identifier, per-iteration metrics, output file index) and is
written with sorted keys so identical runs produce byte-identical files.
Wall-clock timings are volatile and therefore live in a separate
``timings.json`` next to the manifest, referenced from its file index.
"""

import json

from . import __version__
from .seeding import PRNG_ID
from .validation import ConfigurationError

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"
TIMINGS_NAME = "timings.json"
METRICS_NAME = "metrics.csv"


def _canonical_json(data):
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def build_manifest(config_echo, algorithm, iterations, termination_reason,
                   source_info, target_info, files, internal_similarity=None,
                   status="ok", error=None):
    return {
        "manifest_version": MANIFEST_VERSION,
        "library": {"name": "flowrefine", "version": __version__},
        "prng": PRNG_ID,
        "status": status,
        "error": error,
        "algorithm": algorithm,
        "config": config_echo,
        "source": source_info,
        "target": target_info,
        "internal_similarity": internal_similarity,
        "iterations": iterations,
        "termination_reason": termination_reason,
        "files": files,
    }


def write_manifest(manifest, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_canonical_json(manifest))


def read_manifest(path):
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or "manifest_version" not in data:
        raise ConfigurationError(f"{path}: not a run manifest")
    return data


def write_timings(timings, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_canonical_json(timings))


def write_metrics_csv(rows, path):
    """rows: iterables of (index, label, CostReport)."""
    lines = ["iteration,label,cost,a_to_b_sum,b_to_a_sum"]
    for index, label, report in rows:
        lines.append(
            f"{index},{label},{format(report.value, '.17g')},"
            f"{format(report.a_to_b_sum, '.17g')},"
            f"{format(report.b_to_a_sum, '.17g')}"
        )
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def summarize_manifest(manifest):
    """Human-readable multi-line summary for the inspect subcommand."""
    lines = []
    lib = manifest.get("library", {})
    lines.append(
        f"{lib.get('name', '?')} {lib.get('version', '?')} run "
        f"[{manifest.get('status', '?')}]"
    )
    lines.append(f"algorithm: {manifest.get('algorithm')}")
    config = manifest.get("config", {})
    lines.append(f"seed: {config.get('seed')}  prng: {manifest.get('prng')}")
    src = manifest.get("source", {})
    tgt = manifest.get("target", {})
    lines.append(
        f"source: {src.get('count')}x{src.get('dim')}  "
        f"target: {tgt.get('count')}x{tgt.get('dim')}"
    )
    floor = manifest.get("internal_similarity")
    if floor:
        lines.append(
            f"internal similarity ({floor.get('subset_size')} vs "
            f"{floor.get('subset_size')}): {floor.get('value'):.6g}"
        )
    iterations = manifest.get("iterations", [])
    lines.append(f"iterations: {len(iterations)}")
    for it in iterations:
        lines.append(f"  {it['index']:3d} {it['label']:<12} "
                     f"cost={it['cost']:.6g}")
    lines.append(f"termination: {manifest.get('termination_reason')}")
    if manifest.get("error"):
        lines.append(f"error: {manifest['error']}")
    return "\n".join(lines)
