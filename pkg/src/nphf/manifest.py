"""Run manifests: every CLI run records its resolved config, seed, input and
output digests, and wall time in one JSON file next to its outputs."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

FORMAT_VERSIONS = {"model": 1, "oracle": 1}


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def write_manifest(
    manifest_path,
    command: str,
    config: dict,
    seed,
    inputs: dict,
    outputs: dict,
    wall_secs: float,
) -> Path:
    from . import __version__

    doc = {
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": {
            name: {"path": str(p), "digest": file_digest(p)} for name, p in inputs.items()
        },
        "outputs": {
            name: {"path": str(p), "digest": file_digest(p)} for name, p in outputs.items()
        },
        "wall_secs": round(wall_secs, 3),
        "versions": {"nphf": __version__, **FORMAT_VERSIONS},
    }
    manifest_path = Path(manifest_path)
    manifest_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return manifest_path


def manifest_for(primary_output) -> Path:
    """Convention: <output>.manifest.json beside the primary output file."""
    p = Path(primary_output)
    return p.with_name(p.name + ".manifest.json")
