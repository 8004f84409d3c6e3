"""
Geodesic Lab - Storage Module

This module keeps a content-addressed JSON store on the local disk for
partitions, transition matrices and enumerations, and writes run manifests
with SHA-256 hashes of every output file.
"""

import hashlib
import json
import os
import platform
from pathlib import Path
from typing import Any, Dict, Optional

from rich import print as rprint

DEFAULT_CACHE = "./.geolab_cache"
LAB_VERSION = "1.0.0"


def json_digest(data: Any) -> str:
    """SHA-256 of the sorted-key JSON encoding"""
    return hashlib.sha256(json.dumps(data, sort_keys=True).encode("utf-8")).hexdigest()


def file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class LabStore:
    """Local JSON store with entries at <cache>/<kind>/<digest[:2]>/<digest>.json"""

    def __init__(self, root: Optional[str] = None, verbose: bool = True):
        self.root = Path(root or os.getenv("GEODESIC_LAB_CACHE", DEFAULT_CACHE))
        self.verbose = verbose

    def _path(self, kind: str, digest: str) -> Path:
        return self.root / kind / digest[:2] / f"{digest}.json"

    def store_json(self, data: Dict[str, Any], kind: str) -> str:
        """Store data and return its digest"""
        digest = json_digest(data)
        path = self._path(kind, digest)
        if not path.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(data, sort_keys=True))
            if self.verbose:
                rprint(f"[green]📁 Stored {kind} entry {digest[:12]}")
        return digest

    def retrieve_json(self, digest: str, kind: str) -> Optional[Dict[str, Any]]:
        """Load an entry by digest, or None when absent"""
        path = self._path(kind, digest)
        if not path.exists():
            return None
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ValueError(f"Cache entry {path} is not valid JSON: {e}") from e
        if self.verbose:
            rprint(f"[green]📥 Loaded {kind} entry {digest[:12]}")
        return data

    def lookup(self, kind: str, params: Dict[str, Any]) -> Optional[Dict[str, Any]]:
        """Entry stored under the hash of its generating parameters"""
        return self.retrieve_json(json_digest(params), f"{kind}-by-params")

    def remember(self, kind: str, params: Dict[str, Any], data: Dict[str, Any]) -> str:
        """Store data under the hash of its generating parameters; returns the content digest"""
        key = json_digest(params)
        path = self._path(f"{kind}-by-params", key)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(data, sort_keys=True))
        if self.verbose:
            rprint(f"[green]📁 Cached {kind} for parameters {key[:12]}")
        return json_digest(data)


def package_versions() -> Dict[str, str]:
    from importlib.metadata import PackageNotFoundError, version

    versions = {"python": platform.python_version(), "geolab": LAB_VERSION}
    for name in ("numpy", "scipy", "sympy", "pydantic", "rich"):
        try:
            versions[name] = version(name)
        except PackageNotFoundError:
            versions[name] = "missing"
    return versions


def write_manifest(
    out_dir: Path,
    command: str,
    params: Dict[str, Any],
    input_hashes: Dict[str, str],
    outputs: Dict[str, Path],
) -> Path:
    """manifest.json with {command, params, versions, input_hashes, output_hashes}"""
    manifest = {
        "command": command,
        "params": params,
        "versions": package_versions(),
        "input_hashes": input_hashes,
        "output_hashes": {name: file_sha256(path) for name, path in sorted(outputs.items())},
    }
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
