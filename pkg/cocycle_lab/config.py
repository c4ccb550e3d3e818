"""Configuration for Cocycle Lab."""

import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from . import DEFAULT_OUTPUT_DIR


@dataclass
class LabConfig:
    """Numerical defaults shared by every experiment."""

    # Parallelism (never changes results, only wall time)
    workers: int = 1
    chunk_size: int = 512

    # Randomised sampling
    seed: int = 0

    # Output
    output_dir: Path = DEFAULT_OUTPUT_DIR

    # Singularity protocol
    singular_tol: float = 1e-300  # |a| below this stops raw/unimodular gauges
    log_singularity_tol: float = 1e-12  # orbit closer than this to a log pole is dropped
    dropped_warning_fraction: float = 0.01

    # Quadrature / sup-norm grids
    drift_grid: int = 4096
    sup_grid: int = 4096
    strip_grid: Tuple[int, int] = (256, 64)

    # Holder fits: |dL| below this is finite-scale noise of the proxy
    holder_min_delta: float = 1e-4

    # Continued fractions
    default_depth: int = 40
    cf_ulps: int = 4

    # Absolute constants nobody pins down; every report echoes them
    constants: Dict[str, float] = field(
        default_factory=lambda: {
            "C_abs": 1.0,
            "c_abs": 1.0,
            "C_test": 10.0,
            "mu_guess": 1.0,
        }
    )

    @classmethod
    def from_env(cls) -> "LabConfig":
        """Load configuration from environment variables."""
        config = cls()

        if workers := os.environ.get("COCYCLE_LAB_WORKERS"):
            config.workers = int(workers)

        if seed := os.environ.get("COCYCLE_LAB_SEED"):
            config.seed = int(seed)

        if out := os.environ.get("COCYCLE_LAB_OUTPUT_DIR"):
            config.output_dir = Path(out)

        if min_delta := os.environ.get("COCYCLE_LAB_HOLDER_MIN_DELTA"):
            config.holder_min_delta = float(min_delta)

        for key, env in (
            ("C_abs", "COCYCLE_LAB_C_ABS"),
            ("c_abs", "COCYCLE_LAB_SMALL_C_ABS"),
            ("C_test", "COCYCLE_LAB_C_TEST"),
            ("mu_guess", "COCYCLE_LAB_MU_GUESS"),
        ):
            if value := os.environ.get(env):
                config.constants[key] = float(value)

        return config

    def constant(self, name: str) -> float:
        """Look up one of the user-supplied absolute constants."""
        return self.constants[name]

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["output_dir"] = str(self.output_dir)
        data["strip_grid"] = list(self.strip_grid)
        return data


# Global config instance
_config: Optional[LabConfig] = None


def get_config() -> LabConfig:
    """Get or create global config instance."""
    global _config
    if _config is None:
        _config = LabConfig.from_env()
    return _config
