"""Dataset types, on-disk layout, and cross-validation fold assignment.

A dataset directory holds ``images/<id>.pgm``, ``masks/<id>.pgm`` and a
``meta.csv`` with columns id, subject, phase, calibration_mm_per_px.
Sample ids are ``<subject>_<phase>`` by convention but any unique string
works; masks use pixel values {0, 255}.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractViolation, FormatError
from .pgm import pgm_read, pgm_write

PHASES = ("ED", "ES", "other")


@dataclass
class ImageSample:
    """Grayscale image, binary ground-truth mask, and pixel calibration."""

    image: np.ndarray           # (H, W) uint8
    mask: np.ndarray            # (H, W) {0, 1}
    calibration: float          # mm per pixel
    phase: str = "other"
    subject: str = ""
    sample_id: str = ""

    def __post_init__(self):
        self.image = np.asarray(self.image)
        self.mask = np.asarray(self.mask)
        if self.image.shape != self.mask.shape:
            raise ContractViolation(
                f"image {self.image.shape} and mask {self.mask.shape} shapes differ")
        vals = np.unique(self.mask)
        if not np.all(np.isin(vals, (0, 1))):
            raise ContractViolation(f"mask must be binary, found values {vals[:8]}")
        if not self.calibration > 0:
            raise ContractViolation(f"calibration must be positive, got {self.calibration}")
        if self.phase not in PHASES:
            raise ContractViolation(f"phase must be one of {PHASES}, got {self.phase!r}")
        if not self.sample_id:
            self.sample_id = f"{self.subject}_{self.phase}" if self.subject else "sample"


@dataclass
class FoldAssignment:
    """Per-sample fold indices; all samples of one subject share a fold."""

    folds: list[int]
    n_folds: int
    subject_folds: dict[str, int] = field(default_factory=dict)

    def train_val_indices(self, held_out: int) -> tuple[list[int], list[int]]:
        train = [i for i, f in enumerate(self.folds) if f != held_out]
        val = [i for i, f in enumerate(self.folds) if f == held_out]
        return train, val


def make_folds(samples: list[ImageSample], n_folds: int = 5, seed: int = 0) -> FoldAssignment:
    """Subject-level shuffled round-robin assignment, stratified by each
    subject's phase-tag profile so every fold sees a similar phase mix."""
    subjects: dict[str, list[int]] = {}
    for i, s in enumerate(samples):
        subjects.setdefault(s.subject, []).append(i)
    if len(subjects) < n_folds:
        raise ContractViolation(
            f"need at least {n_folds} subjects for {n_folds} folds, have {len(subjects)}")

    strata: dict[tuple, list[str]] = {}
    for subj, idxs in subjects.items():
        profile = tuple(sorted(samples[i].phase for i in idxs))
        strata.setdefault(profile, []).append(subj)

    rng = np.random.default_rng(seed)
    folds = [0] * len(samples)
    subject_folds: dict[str, int] = {}
    counter = 0
    for profile in sorted(strata):
        members = sorted(strata[profile])
        rng.shuffle(members)
        for subj in members:
            f = counter % n_folds
            subject_folds[subj] = f
            for i in subjects[subj]:
                folds[i] = f
            counter += 1
    return FoldAssignment(folds=folds, n_folds=n_folds, subject_folds=subject_folds)


def save_dataset(samples: list[ImageSample], directory: str | Path) -> None:
    directory = Path(directory)
    (directory / "images").mkdir(parents=True, exist_ok=True)
    (directory / "masks").mkdir(parents=True, exist_ok=True)
    with open(directory / "meta.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "subject", "phase", "calibration_mm_per_px"])
        for s in samples:
            pgm_write(directory / "images" / f"{s.sample_id}.pgm", s.image)
            pgm_write(directory / "masks" / f"{s.sample_id}.pgm",
                      (s.mask * 255).astype(np.uint8))
            writer.writerow([s.sample_id, s.subject, s.phase, repr(s.calibration)])


def load_dataset(directory: str | Path) -> list[ImageSample]:
    directory = Path(directory)
    meta = directory / "meta.csv"
    if not meta.exists():
        raise FormatError(f"{meta}: dataset index not found")
    samples = []
    with open(meta, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"id", "subject", "phase", "calibration_mm_per_px"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise FormatError(f"{meta}: header must contain {sorted(required)}")
        for row in reader:
            sid = row["id"]
            image = pgm_read(directory / "images" / f"{sid}.pgm")
            mask_img = pgm_read(directory / "masks" / f"{sid}.pgm")
            mask = (mask_img > 127).astype(np.uint8)
            samples.append(ImageSample(
                image=image, mask=mask,
                calibration=float(row["calibration_mm_per_px"]),
                phase=row["phase"], subject=row["subject"], sample_id=sid))
    return samples
