"""Sidecar provenance files for pipeline artifacts.

Every CLI step that writes `<output>` also writes `<output>.meta.json`
recording the tool version, sha256 of each input file, and any parameters
that affect the result (seeds, thresholds, imputation tables). The file
contains nothing run-dependent, so re-running a step on identical inputs
yields a byte-identical sidecar; diffing two sidecars explains a diff in
the artifacts.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from . import __version__


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_meta(
    output_path: str | Path,
    inputs: dict[str, str | Path],
    parameters: dict | None = None,
) -> Path:
    """Write `<output_path>.meta.json` and return its path."""
    doc = {
        "tool": "bikerisk",
        "version": __version__,
        "inputs": {name: sha256_file(p) for name, p in sorted(inputs.items())},
        "parameters": parameters or {},
    }
    meta_path = Path(str(output_path) + ".meta.json")
    meta_path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return meta_path
