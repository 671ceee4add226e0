"""Run manifests: a record of how an artifact directory was produced.

Every command that writes artifacts drops a ``manifest.json`` next to
them with the resolved arguments, the master seed, and content digests
of inputs and outputs. The manifest carries a wall-clock timestamp, so
it is the one file in an artifact directory excluded from byte-identity
comparisons between reruns; its digest fields still make such
comparisons easy without hashing the artifacts again.
"""

from __future__ import annotations

import datetime
import hashlib
import json
from pathlib import Path

MANIFEST_NAME = "manifest.json"


def file_digest(path: str | Path) -> str:
    """Hex sha256 of a file's bytes."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: str | Path, command: str, arguments: dict,
                   seed: int, inputs: list[str | Path],
                   outputs: list[str | Path],
                   config: dict | None = None) -> Path:
    """Write ``manifest.json`` into ``out_dir`` and return its path.

    Inputs are recorded under the path given; outputs live inside
    ``out_dir`` and are recorded by file name. Call this after all
    outputs exist so their digests are final.
    """
    out_dir = Path(out_dir)
    record = {
        "command": command,
        "arguments": {k: str(v) if isinstance(v, Path) else v
                      for k, v in sorted(arguments.items())},
        "seed": seed,
        "config": config,
        "inputs": {str(p): file_digest(p) for p in inputs},
        "outputs": {Path(p).name: file_digest(p) for p in outputs},
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    path = out_dir / MANIFEST_NAME
    path.write_text(json.dumps(record, sort_keys=True, indent=2) + "\n")
    return path


def read_manifest(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())
