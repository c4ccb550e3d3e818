"""
Cocycle Lab - Manifest Module
Experiment configs, their content hashes, run manifests written next to every
output file, and the deterministic JSON/CSV writers.
"""

import csv
import hashlib
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import MANIFEST_SUFFIX, __version__

logger = logging.getLogger(__name__)


def _jsonable(value: Any) -> Any:
    """Recursively convert numpy scalars/arrays, complex numbers and paths."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, Path):
        return str(value)
    return value


def dumps_json(data: Any) -> str:
    """Canonical JSON text: sorted keys, 2-space indent, trailing newline."""
    return json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n"


def dumps_csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buffer.getvalue()


def content_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class ExperimentConfig:
    """Everything that determines an output file; workers and output path excluded from the hash."""

    command: str
    params: Dict[str, Any] = field(default_factory=dict)
    model_path: Optional[str] = None
    model_hash: Optional[str] = None
    output_path: Optional[str] = None
    seed: int = 0
    constants: Dict[str, float] = field(default_factory=dict)
    workers: int = 1

    def canonical(self) -> Dict[str, Any]:
        return _jsonable(
            {
                "command": self.command,
                "params": self.params,
                "model_hash": self.model_hash,
                "seed": self.seed,
                "constants": self.constants,
                "version": __version__,
            }
        )

    @property
    def config_hash(self) -> str:
        return content_hash(json.dumps(self.canonical(), sort_keys=True))

    def to_dict(self) -> Dict[str, Any]:
        return _jsonable(asdict(self))


@dataclass
class RunManifest:
    """Provenance written alongside every output file."""

    config_hash: str
    version: str
    command: str
    output: str
    seed: int
    constants: Dict[str, float]
    started_at: float
    wall_time: float
    grid_sizes: List[int] = field(default_factory=list)
    dropped_orbits: List[int] = field(default_factory=list)
    config: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def for_run(
        cls,
        config: ExperimentConfig,
        output: Path,
        started_at: float,
        grid_sizes: Sequence[int] = (),
        dropped_orbits: Sequence[int] = (),
    ) -> "RunManifest":
        return cls(
            config_hash=config.config_hash,
            version=__version__,
            command=config.command,
            output=str(output),
            seed=config.seed,
            constants=dict(config.constants),
            started_at=started_at,
            wall_time=time.time() - started_at,
            grid_sizes=[int(g) for g in grid_sizes],
            dropped_orbits=[int(d) for d in dropped_orbits],
            config=config.to_dict(),
        )

    @staticmethod
    def path_for(output: Path) -> Path:
        output = Path(output)
        return output.with_name(output.name + MANIFEST_SUFFIX)

    def to_dict(self) -> Dict[str, Any]:
        return _jsonable(asdict(self))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunManifest":
        return cls(
            config_hash=data["config_hash"],
            version=data["version"],
            command=data["command"],
            output=data["output"],
            seed=data.get("seed", 0),
            constants=data.get("constants", {}),
            started_at=data.get("started_at", 0.0),
            wall_time=data.get("wall_time", math.nan),
            grid_sizes=data.get("grid_sizes", []),
            dropped_orbits=data.get("dropped_orbits", []),
            config=data.get("config", {}),
        )

    def save(self, path: Path):
        """Save manifest to JSON file."""
        Path(path).write_text(dumps_json(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> Optional["RunManifest"]:
        """Load manifest from JSON file."""
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
            return cls.from_dict(data)
        except (FileNotFoundError, json.JSONDecodeError, KeyError) as e:
            logger.warning(f"Failed to load manifest from {path}: {e}")
            return None


def write_output(text: str, output: Path, manifest: RunManifest) -> Path:
    """Write the data file and its manifest; returns the manifest path."""
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text(text, encoding="utf-8")
    manifest_path = RunManifest.path_for(output)
    manifest.save(manifest_path)
    logger.info(f"wrote {output} (config {manifest.config_hash})")
    return manifest_path
