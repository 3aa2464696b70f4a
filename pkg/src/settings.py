import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from dotenv import load_dotenv

DEFAULT_THRESHOLDS = {
    "curve_residual": 1e-12,
    "mc_abs_tol": 5e-3,
    "mc_sigma": 3.0,
    "isometry_residual": 1e-10,
    "recomposition_residual": 1e-8,
    "povm_completeness": 5e-3,
    "kraus_equivalence": 1e-8,
}

_CONFIG_DIR = Path(__file__).resolve().parent.parent / "config"


@dataclass
class Settings:
    samples: int = 100_000
    seed: int = 20240101
    threads: int = 1
    chunks: int = 8
    output_dir: str = "results"
    thresholds: dict = field(default_factory=lambda: dict(DEFAULT_THRESHOLDS))

    def threshold(self, name):
        return float(self.thresholds[name])


def load_thresholds(path=None):
    """Read tolerance overrides from a JSON file, falling back to defaults"""
    thresholds = dict(DEFAULT_THRESHOLDS)
    path = Path(path) if path else _CONFIG_DIR / "thresholds.json"
    if path.exists():
        with open(path, "r") as f:
            thresholds.update(json.load(f))
    return thresholds


def load_settings(env_file=None):
    """Build settings from .env and the process environment"""
    load_dotenv(env_file)
    return Settings(
        samples=int(os.getenv("TRADEOFF_SAMPLES", "100000")),
        seed=int(os.getenv("TRADEOFF_SEED", "20240101")),
        threads=int(os.getenv("TRADEOFF_THREADS", "1")),
        chunks=int(os.getenv("TRADEOFF_CHUNKS", "8")),
        output_dir=os.getenv("TRADEOFF_OUTPUT_DIR", "results"),
        thresholds=load_thresholds(os.getenv("TRADEOFF_THRESHOLDS")),
    )
