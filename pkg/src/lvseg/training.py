"""Training, evaluation, and measurement command logic.

Training runs subject-level cross-validation: for each fold the training
images are augmented by the configured factor (one original plus
factor - 1 elastic deformations), composed into 2-channel inputs,
shuffled by the run seed, and optimized with momentum SGD; the epoch with
the best validation Dice supplies the saved checkpoint. Everything is
deterministic given (seed, config, data).
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .autograd import Tensor, backward
from .checkpoint import checkpoint_write
from .config import RunConfig
from .dataset import FoldAssignment, ImageSample, load_dataset, make_folds, save_dataset
from .errors import ContractViolation, MeasurementError, TrainingDiverged
from .geometry import extract_contour
from .layers import SGD, softmax_cross_entropy
from .measure import ejection_fraction, measure_mask
from .metrics import dice, hausdorff, jaccard, mad
from .models import Model, build_model, forward_segment
from .phantom import generate_phantom_set
from .preprocess import compose_input, elastic_deform
from .report import MeasurementRow, MetricsRow

SYNTH_PREFIX = "synthetic:"


def resolve_data(data_dir: str, n: int, seed: int) -> list[ImageSample]:
    """Load a dataset directory, or synthesize one for the sentinel
    ``synthetic:<count>``. Samples are resized to n x n if needed."""
    if data_dir.startswith(SYNTH_PREFIX):
        count = int(data_dir[len(SYNTH_PREFIX):])
        if count < 1:
            raise ContractViolation(f"synthetic sample count must be >= 1, got {count}")
        return generate_phantom_set(count, n, seed)
    return [resize_sample(s, n) for s in load_dataset(data_dir)]


def resize_sample(sample: ImageSample, n: int) -> ImageSample:
    """Resize to n x n: bilinear for the image, nearest for the mask."""
    h, w = sample.image.shape
    if (h, w) == (n, n):
        return sample
    zoom = (n / h, n / w)
    image = np.clip(np.rint(ndimage.zoom(sample.image.astype(np.float64), zoom, order=1)),
                    0, 255).astype(np.uint8)
    mask = ndimage.zoom(sample.mask, zoom, order=0)
    # calibration scales inversely with the resampling factor
    calibration = sample.calibration * h / n
    return ImageSample(image=image, mask=mask, calibration=calibration,
                       phase=sample.phase, subject=sample.subject,
                       sample_id=sample.sample_id)


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    val_dice: float
    learning_rate: float


@dataclass
class FoldResult:
    fold: int
    model: Model
    log: list[EpochRecord]
    best_val_dice: float
    train_subjects: list[str]
    val_subjects: list[str]


def _derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def augment_samples(samples: list[ImageSample], factor: int, alpha: float,
                    sigma: float, base_seed: int) -> list[ImageSample]:
    """One original plus factor - 1 deformations per sample."""
    out = []
    for i, s in enumerate(samples):
        out.append(s)
        for k in range(1, factor):
            out.append(elastic_deform(s, alpha=alpha, sigma=sigma,
                                      seed=_derived_seed(base_seed, i, k)))
    return out


def mean_val_dice(model: Model, samples: list[ImageSample]) -> float:
    if not samples:
        return math.nan
    scores = [dice(forward_segment(model, compose_input(s, dtype=model.dtype)), s.mask)
              for s in samples]
    return float(np.mean(scores))


def train_fold(config: RunConfig, train_samples: list[ImageSample],
               val_samples: list[ImageSample], fold: int) -> FoldResult:
    dilation = 1 if config.arch == "unet" else config.dilation
    model = build_model(config.arch, config.n, config.base_width, dilation,
                        dtype=np.float32, seed=_derived_seed(config.seed, fold, 0))
    augmented = augment_samples(train_samples, config.augment_factor,
                                config.elastic_alpha, config.elastic_sigma,
                                _derived_seed(config.seed, fold, 1))
    inputs = [compose_input(s) for s in augmented]
    targets = [s.mask for s in augmented]

    params = model.parameters()
    opt = SGD(params, learning_rate=config.learning_rate, momentum=config.momentum,
              weight_decay=config.weight_decay, lr_decay=config.lr_decay)
    shuffle_rng = np.random.default_rng(_derived_seed(config.seed, fold, 2))

    best = {name: t.data.copy() for name, t in params.items()}
    best_dice = mean_val_dice(model, val_samples)
    log: list[EpochRecord] = []

    for epoch in range(config.epochs):
        opt.set_epoch(epoch)
        order = shuffle_rng.permutation(len(inputs))
        running = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            loss = None
            for i in batch:
                sample_loss = softmax_cross_entropy(
                    model.forward(Tensor(inputs[i])), targets[i])
                loss = sample_loss if loss is None else loss + sample_loss
            loss = loss * (1.0 / len(batch))
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingDiverged(
                    f"non-finite loss (fold {fold}, epoch {epoch}, batch index "
                    f"{start // config.batch_size}, lr {opt.learning_rate:.6g})")
            running += value * len(batch)
            backward(loss)
            opt.step()
        val = mean_val_dice(model, val_samples)
        log.append(EpochRecord(epoch=epoch, loss=running / len(inputs), val_dice=val,
                               learning_rate=opt.learning_rate))
        if not math.isnan(val) and (math.isnan(best_dice) or val > best_dice):
            best_dice = val
            best = {name: t.data.copy() for name, t in params.items()}

    for name, t in params.items():
        t.data = best[name]
    return FoldResult(fold=fold, model=model, log=log, best_val_dice=best_dice,
                      train_subjects=sorted({s.subject for s in train_samples}),
                      val_subjects=sorted({s.subject for s in val_samples}))


def train(config: RunConfig) -> list[FoldResult]:
    """Full cross-validated run; writes per-fold checkpoints, per-fold
    epoch logs, and a folds.json audit record under the output directory."""
    if config.folds < 2:
        raise ContractViolation(f"training needs >= 2 folds, got {config.folds}")
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    samples = resolve_data(config.data_dir, config.n, config.seed)
    assignment = make_folds(samples, config.folds, config.seed)

    results = []
    audit = []
    for fold in range(config.folds):
        train_idx, val_idx = assignment.train_val_indices(fold)
        result = train_fold(config,
                            [samples[i] for i in train_idx],
                            [samples[i] for i in val_idx], fold)
        fold_dir = out_dir / f"fold{fold}"
        fold_dir.mkdir(parents=True, exist_ok=True)
        checkpoint_write(result.model, fold_dir / "checkpoint.bin")
        with open(fold_dir / "log.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "loss", "val_dice", "learning_rate"])
            for rec in result.log:
                w.writerow([rec.epoch, repr(rec.loss), repr(rec.val_dice),
                            repr(rec.learning_rate)])
        audit.append({"fold": fold, "train_subjects": result.train_subjects,
                      "val_subjects": result.val_subjects,
                      "best_val_dice": result.best_val_dice})
        results.append(result)
    with open(out_dir / "folds.json", "w") as fh:
        json.dump(audit, fh, indent=2)
    audit_folds(audit)
    return results


def audit_folds(audit: list[dict]) -> None:
    """No fold may validate on a subject seen in its own training split."""
    for entry in audit:
        overlap = set(entry["train_subjects"]) & set(entry["val_subjects"])
        if overlap:
            raise ContractViolation(
                f"fold {entry['fold']} leaks subjects between splits: {sorted(overlap)}")


# -- evaluation ----------------------------------------------------------

def metrics_for_masks(pred: np.ndarray, truth: np.ndarray,
                      calibration: float | None) -> tuple[float, float, float, float]:
    """Dice/Jaccard on the masks; Hausdorff/MAD on their traced contours
    (NaN when either mask is empty and has no contour)."""
    dm = dice(pred, truth)
    jc = jaccard(pred, truth)
    if pred.any() and truth.any():
        # fragmented predictions are routine for weak models; the largest
        # component is scored without per-image warnings
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            cp = extract_contour(pred)
            ct = extract_contour(truth)
        hd = hausdorff(cp, ct, calibration)
        md = mad(cp, ct, calibration)
    else:
        hd = md = math.nan
    return dm, jc, hd, md


def evaluate_model(model: Model, samples: list[ImageSample]) -> list[MetricsRow]:
    """Per-image rows followed by nan-aware mean and sample-SD summary rows."""
    rows = []
    for s in samples:
        pred = forward_segment(model, compose_input(s, dtype=model.dtype))
        dm, jc, hd, md = metrics_for_masks(pred, s.mask, s.calibration)
        rows.append(MetricsRow(s.sample_id, s.phase, dm, jc, hd, md))
    return rows + summary_rows(rows)


def summary_rows(rows: list[MetricsRow]) -> list[MetricsRow]:
    cols = {name: np.array([getattr(r, name) for r in rows])
            for name in ("dice", "jaccard", "hd_mm", "mad_mm")}

    def agg(fn):
        return {name: float(fn(v)) if np.isfinite(v).any() else math.nan
                for name, v in cols.items()}

    mean = agg(np.nanmean)
    sd = agg(lambda v: np.nanstd(v, ddof=1) if np.isfinite(v).sum() > 1 else math.nan)
    return [MetricsRow("mean", "-", mean["dice"], mean["jaccard"], mean["hd_mm"],
                       mean["mad_mm"]),
            MetricsRow("sd", "-", sd["dice"], sd["jaccard"], sd["hd_mm"], sd["mad_mm"])]


def format_summary(rows: list[MetricsRow]) -> str:
    """Human-readable "mean +/- sd" line in the style of a results table."""
    by_id = {r.sample_id: r for r in rows}
    mean, sd = by_id.get("mean"), by_id.get("sd")
    if mean is None or sd is None:
        return "no summary available"
    parts = [f"{label} {getattr(mean, col):.3f} ± {getattr(sd, col):.3f}"
             for label, col in (("DM", "dice"), ("JC", "jaccard"),
                                ("HD", "hd_mm"), ("MAD", "mad_mm"))]
    return ", ".join(parts)


# -- measurement ---------------------------------------------------------

def measure_samples(samples: list[ImageSample]) -> list[MeasurementRow]:
    """Geometry measurements per mask plus one EF row per ED/ES subject
    pair; rows are flagged when the length procedure fails and EF is
    omitted for unmatched subjects."""
    rows: list[MeasurementRow] = []
    volumes: dict[str, dict[str, float]] = {}
    for s in samples:
        try:
            m = measure_mask(s.mask, s.calibration, s.phase)
            rows.append(MeasurementRow(s.sample_id, s.phase, m.length_cm, m.area_cm2,
                                       m.volume_ml))
            if s.phase in ("ED", "ES"):
                volumes.setdefault(s.subject, {})[s.phase] = m.volume_ml
        except MeasurementError:
            rows.append(MeasurementRow(s.sample_id, s.phase, flag="length_error"))

    for subject in sorted(volumes):
        v = volumes[subject]
        if "ED" in v and "ES" in v:
            rows.append(MeasurementRow(subject, "EF",
                                       ef_pct=ejection_fraction(v["ED"], v["ES"])))
        else:
            rows.append(MeasurementRow(subject, "EF", flag="unmatched"))
    return rows


def synth(count: int, n: int, seed: int, out_dir: str | Path) -> list[ImageSample]:
    samples = generate_phantom_set(count, n, seed)
    save_dataset(samples, out_dir)
    return samples
