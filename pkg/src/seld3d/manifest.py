"""Run manifests: provenance sidecars written next to every output file.

Identical manifests (same command, configs, input digests and seed)
imply identical outputs, since every pipeline stage is deterministic.
"""

from __future__ import annotations

import hashlib
import json
import os
import time


def _digest_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _digest_obj(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()


def write_manifest(out_path, command: str, inputs=(), configs=None,
                   seed=None, wall_time: float = 0.0) -> str:
    """Write ``<out_path>.manifest.json``; returns the manifest path."""
    from . import __version__

    manifest = {
        "command": command,
        "config_hashes": {k: _digest_obj(v) for k, v in (configs or {}).items()},
        "input_digests": {str(p): _digest_file(p) for p in inputs if os.path.exists(str(p))},
        "seed": seed,
        "tool_version": __version__,
        "wall_time": wall_time,
    }
    path = f"{out_path}.manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return path


class Stopwatch:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
