"""Run manifests: config snapshot plus content hashes of inputs and outputs.

Every command writes ``<output>.manifest.json`` next to its artifacts.
Timestamps live only here, keeping the artifacts themselves byte-stable
across reruns.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone

from . import __version__


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fp:
        for chunk in iter(lambda: fp.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class RunManifest:
    command: str
    config_snapshot: dict
    seed: int | None = None
    tool_version: str = __version__
    input_digests: list[dict] = field(default_factory=list)
    output_digests: list[dict] = field(default_factory=list)
    started: str = field(default_factory=_utcnow)
    finished: str | None = None

    def add_input(self, path: str) -> None:
        self.input_digests.append({"path": path, "sha256": sha256_file(path)})

    def add_output(self, path: str) -> None:
        self.output_digests.append({"path": path, "sha256": sha256_file(path)})

    def write(self, path: str) -> None:
        self.finished = _utcnow()
        with open(path, "w", encoding="utf-8") as fp:
            json.dump(self.__dict__, fp, indent=2, ensure_ascii=False)
            fp.write("\n")
