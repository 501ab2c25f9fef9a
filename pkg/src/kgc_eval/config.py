"""Experiment configuration: flat key=value files with # comments.

Command-line flags override file values; every run can log the resolved
configuration verbatim, and its SHA-256 hash goes into artifact headers so
outputs are traceable to the exact configuration that produced them.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field, fields

from .errors import DataFormatError

ENV_SEED = "KGC_EVAL_SEED"


@dataclass
class ExperimentConfig:
    train: str = ""
    valid: str = ""
    test: str = ""
    runs: str = ""  # comma-joined tag=path entries
    run_format: str = "ranked"
    runs_complete: bool = False
    judgments: str = ""
    pool: str = ""
    templates: str = ""
    labels: str = ""
    metrics: str = ""  # comma-joined metric ids; empty = all
    ks: str = "1,3,10"
    ties: str = "mean"
    include_annotated_positives: bool = True
    seed: int = 0
    depths: str = "1,2,3,4,5,6,7,8,9,10"
    sizes: str = "0.01,0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5,0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95"
    repeats: int = 50
    workers: int = 0  # 0 = one worker per available core
    out: str = "out"

    def effective_workers(self) -> int:
        if self.workers >= 1:
            return self.workers
        return os.cpu_count() or 1

    def resolved_lines(self) -> list[str]:
        return [f"{f.name}={getattr(self, f.name)}" for f in fields(self)]

    def hash(self) -> str:
        digest = hashlib.sha256("\n".join(self.resolved_lines()).encode("utf-8"))
        return digest.hexdigest()[:12]

    def parsed_ks(self) -> tuple[int, ...]:
        return tuple(int(k) for k in self.ks.split(",") if k)

    def parsed_depths(self) -> tuple[int, ...]:
        return tuple(int(d) for d in self.depths.split(",") if d)

    def parsed_sizes(self) -> tuple[float, ...]:
        return tuple(float(s) for s in self.sizes.split(",") if s)

    def parsed_runs(self) -> list[tuple[str, str]]:
        out = []
        for item in self.runs.split(","):
            item = item.strip()
            if not item:
                continue
            tag, sep, path = item.partition("=")
            if not sep:
                raise DataFormatError(f"run entry {item!r} must look like tag=path")
            out.append((tag, path))
        return out


_BOOL_FIELDS = {"runs_complete", "include_annotated_positives"}
_INT_FIELDS = {"seed", "repeats", "workers"}


def load_config(path: str) -> ExperimentConfig:
    config = ExperimentConfig()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise DataFormatError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key = key.strip()
            value = value.strip()
            if not hasattr(config, key):
                raise DataFormatError(f"{path}:{lineno}: unknown config key {key!r}")
            set_field(config, key, value)
    return config


def set_field(config: ExperimentConfig, key: str, value: str) -> None:
    if key in _BOOL_FIELDS:
        setattr(config, key, value.lower() in ("1", "true", "yes", "on"))
    elif key in _INT_FIELDS:
        setattr(config, key, int(value))
    else:
        setattr(config, key, value)


def seed_from_env(config: ExperimentConfig) -> ExperimentConfig:
    """Apply the KGC_EVAL_SEED fallback when the config left seed at 0."""
    env = os.environ.get(ENV_SEED)
    if env is not None and config.seed == 0:
        config.seed = int(env)
    return config
