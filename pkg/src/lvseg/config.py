"""Run configuration: a flat JSON file with snake_case keys.

Unknown keys are rejected outright so a typo cannot silently fall back to
a default. The stock defaults are desk-scale (small input extent, narrow
base width, small batches); the clinical-scale settings (batch 64, max
epoch 100, augmentation factor 10) are plain values of the same fields.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ContractViolation, FormatError
from .models import ARCH_TAGS


@dataclass
class RunConfig:
    arch: str = "mfp-unet"
    n: int = 64
    base_width: int = 8
    dilation: int = 2
    learning_rate: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 0.0005
    lr_decay: float = 1e-4
    batch_size: int = 8
    epochs: int = 20
    augment_factor: int = 1
    elastic_alpha: float = 2.0
    elastic_sigma: float = 6.0
    folds: int = 5
    seed: int = 0
    data_dir: str = "synthetic:10"
    out_dir: str = "out"

    def __post_init__(self):
        if self.arch not in ARCH_TAGS:
            raise ContractViolation(f"arch must be one of {ARCH_TAGS}, got {self.arch!r}")
        if self.n % 16 != 0 or self.n <= 0:
            raise ContractViolation(f"n must be a positive multiple of 16, got {self.n}")
        positive = ("base_width", "dilation", "learning_rate", "momentum", "batch_size",
                    "augment_factor", "elastic_sigma", "folds")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ContractViolation(f"{name} must be positive, got {getattr(self, name)}")
        non_negative = ("weight_decay", "lr_decay", "epochs", "elastic_alpha", "seed")
        for name in non_negative:
            if getattr(self, name) < 0:
                raise ContractViolation(f"{name} must be >= 0, got {getattr(self, name)}")

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ContractViolation(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    @classmethod
    def from_json(cls, path: str | Path) -> "RunConfig":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise FormatError(f"{path}: config must be a JSON object")
        return cls.from_dict(raw)

    def to_json(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(dataclasses.asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")
