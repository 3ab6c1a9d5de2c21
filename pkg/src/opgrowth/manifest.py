"""Run manifests: enough metadata to replay a run and diff its outputs.

Every CLI run writes a manifest.json beside its outputs holding the
subcommand, its options, the backend, and a sha256 per output file;
replaying a manifest reruns the command and compares digests byte for
byte.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

SCHEMA_VERSION = 1


@dataclass
class RunManifest:
    command: str
    options: dict
    backend: str
    tool_version: str
    outputs: dict[str, str] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "tool": "opgrowth",
            "tool_version": self.tool_version,
            "command": self.command,
            "options": self.options,
            "backend": self.backend,
            "outputs": self.outputs,
        }


def digest_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def write_outputs(out_dir: str, files: dict[str, bytes], manifest: RunManifest) -> str:
    """Write output files plus the manifest; returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    for name, data in files.items():
        with open(os.path.join(out_dir, name), "wb") as fh:
            fh.write(data)
        manifest.outputs[name] = digest_bytes(data)
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def load_manifest(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported manifest schema {data.get('schema_version')}")
    return data
