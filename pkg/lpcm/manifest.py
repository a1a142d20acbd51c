"""
Run manifests: input hash, resolved configuration, stage times and output
hashes of one command, so a run can be repeated and compared
"""

import hashlib
import json
import os
import platform
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime
from typing import Dict, List, Optional

from . import __version__


def hash_file(path: str) -> str:
    """SHA-256 of a file's contents"""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    """Everything needed to reproduce one command's outputs"""
    subcommand: str
    input_path: str
    input_sha256: str
    config: Dict
    tool_version: str = __version__
    created: str = field(default_factory=lambda: datetime.now().isoformat())
    python: str = field(default_factory=platform.python_version)
    stage_times: Dict[str, float] = field(default_factory=dict)
    outputs: Dict[str, str] = field(default_factory=dict)
    summary: Dict = field(default_factory=dict)

    @classmethod
    def create(cls, subcommand: str, input_path: str, config: Dict) -> "RunManifest":
        return cls(subcommand=subcommand, input_path=os.path.abspath(input_path),
                   input_sha256=hash_file(input_path), config=dict(config))

    def stage(self, name: str):
        """Context manager recording the wall time of a stage"""
        return _StageTimer(self, name)

    def add_output(self, path: str) -> None:
        self.outputs[os.path.basename(path)] = hash_file(path)

    def to_dict(self) -> Dict:
        return asdict(self)

    def write(self, filename: str) -> None:
        with open(filename, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)

    @staticmethod
    def load(filename: str) -> Optional["RunManifest"]:
        """Load a manifest; None if the file does not exist"""
        if not os.path.exists(filename):
            return None
        with open(filename, "r") as f:
            data = json.load(f)
        return RunManifest(**data)

    def diff(self, other: "RunManifest") -> Dict[str, object]:
        """Compare inputs, configuration and output hashes with another run"""
        config_changes = {
            key: [self.config.get(key), other.config.get(key)]
            for key in sorted(set(self.config) | set(other.config))
            if self.config.get(key) != other.config.get(key)
        }
        added: List[str] = sorted(set(other.outputs) - set(self.outputs))
        removed: List[str] = sorted(set(self.outputs) - set(other.outputs))
        modified: List[str] = sorted(
            name for name in set(self.outputs) & set(other.outputs)
            if self.outputs[name] != other.outputs[name]
        )
        return {
            "same_input": self.input_sha256 == other.input_sha256,
            "config": config_changes,
            "added": added,
            "removed": removed,
            "modified": modified,
        }


class _StageTimer:
    def __init__(self, manifest: RunManifest, name: str):
        self.manifest = manifest
        self.name = name

    def __enter__(self):
        self.started = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.manifest.stage_times[self.name] = time.perf_counter() - self.started
        return False
