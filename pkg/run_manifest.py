#!/usr/bin/env python3
"""
Run manifests.

Every CLI run writes one manifest.json next to its artifacts: the
command, argv, resolved config, seed, artifact-format version and the
content digests of its inputs and outputs. Manifests carry no
timestamps, so repeated runs produce identical manifests.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List

from embedding_io import FORMAT_VERSION, file_digest, locked_writer
from errors import ParseError, SchemaError

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


@dataclass
class RunManifest:
    """Record of one CLI run; outputs are keyed by file name inside the run directory"""
    command: str
    argv: List[str]
    config: Dict[str, Any]
    seed: int
    format_version: str = FORMAT_VERSION
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: Dict[str, str] = field(default_factory=dict)

    def add_input(self, path) -> None:
        self.inputs[str(path)] = file_digest(path)

    def add_output(self, path) -> None:
        self.outputs[Path(path).name] = file_digest(path)


def save_manifest(manifest: RunManifest, run_dir) -> Path:
    """Write manifest.json into `run_dir`, keys sorted"""
    path = Path(run_dir) / MANIFEST_NAME
    with locked_writer(path) as f:
        json.dump(asdict(manifest), f, indent=2, sort_keys=True)
        f.write("\n")
    logger.debug(f"manifest written to {path}")
    return path


def load_manifest(path) -> RunManifest:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid manifest JSON: {e.msg}", line=e.lineno) from None
    try:
        return RunManifest(**data)
    except TypeError as e:
        raise SchemaError(f"malformed manifest: {e}") from None


def verify_manifest(path) -> List[str]:
    """
    Recompute every digest named in a manifest.

    Outputs resolve against the manifest's directory, inputs as recorded.

    Returns:
        Descriptions of missing or changed files; empty when all match
    """
    path = Path(path)
    manifest = load_manifest(path)
    problems = []
    entries = [(Path(p), d) for p, d in manifest.inputs.items()]
    entries += [(path.parent / name, d) for name, d in manifest.outputs.items()]
    for file_path, expected in entries:
        if not file_path.exists():
            problems.append(f"missing: {file_path}")
        elif file_digest(file_path) != expected:
            problems.append(f"changed: {file_path}")
    return problems
