"""Run manifest: config snapshot, seed, and per-stage artifact hashes.

The manifest carries no timestamps, so a rerun with the same inputs and
seed produces a byte-identical manifest alongside byte-identical
artifacts. A lock file guards the output directory against concurrent
pipeline runs.
"""

from __future__ import annotations

import hashlib
import json
import os
from contextlib import contextmanager
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path


def hash_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _package_version() -> str:
    try:
        return metadata.version("genremap")
    except metadata.PackageNotFoundError:
        return "unknown"


@dataclass
class RunManifest:
    master_seed: int
    config: dict
    version: str = field(default_factory=_package_version)
    stages: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    failed_stage: str | None = None
    error: str | None = None
    root: Path | None = None  # paths under root are recorded relative to it

    def _relative(self, path: Path) -> str:
        if self.root is not None:
            try:
                return str(Path(path).relative_to(self.root))
            except ValueError:
                pass
        return str(path)

    def record_stage(self, name: str, inputs: list[Path] = (),
                     outputs: list[Path] = (), warnings: list[str] = ()) -> None:
        self.stages[name] = {
            "inputs": {self._relative(p): hash_file(p) for p in inputs},
            "outputs": {self._relative(p): hash_file(p) for p in outputs},
            "warnings": list(warnings),
        }

    def record_failure(self, stage: str, error: str) -> None:
        self.failed_stage = stage
        self.error = error

    def save(self, path: str | Path) -> None:
        payload = {
            "version": self.version,
            "master_seed": self.master_seed,
            "config": self.config,
            "stages": self.stages,
            "warnings": self.warnings,
            "failed_stage": self.failed_stage,
            "error": self.error,
        }
        Path(path).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n",
            encoding="utf-8")


@contextmanager
def output_lock(out_dir: str | Path):
    """Exclusive lock on an output directory; at most one pipeline at a time."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lock_path = out_dir / ".genremap.lock"
    try:
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise RuntimeError(
            f"output directory {out_dir} is locked by another run "
            f"(remove {lock_path} if that run is dead)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock_path.unlink(missing_ok=True)
