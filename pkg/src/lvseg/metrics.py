"""Segmentation agreement metrics: overlap scores on masks (Dice,
Jaccard) and contour distances (Hausdorff, mean absolute distance).

Distances are in pixels unless a calibration (mm per pixel) is supplied.
When both masks are empty the overlap scores are defined as 1: trivially
perfect agreement, which keeps aggregation over background-only crops
well defined.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractViolation


def _as_bool(mask: np.ndarray) -> np.ndarray:
    return np.asarray(mask) > 0


def dice(a: np.ndarray, b: np.ndarray) -> float:
    """2|A n B| / (|A| + |B|)."""
    a, b = _as_bool(a), _as_bool(b)
    if a.shape != b.shape:
        raise ContractViolation(f"mask shapes differ: {a.shape} vs {b.shape}")
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return 1.0
    return 2.0 * int((a & b).sum()) / total


def jaccard(a: np.ndarray, b: np.ndarray) -> float:
    """|A n B| / |A u B|."""
    a, b = _as_bool(a), _as_bool(b)
    if a.shape != b.shape:
        raise ContractViolation(f"mask shapes differ: {a.shape} vs {b.shape}")
    union = int((a | b).sum())
    if union == 0:
        return 1.0
    return int((a & b).sum()) / union


def _point_set(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) == 0:
        raise ContractViolation(f"need a non-empty (n, 2) point set, got shape {pts.shape}")
    return pts


def _min_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """For each point of a, the squared distance to its nearest point of b."""
    dx = a[:, 0][:, None] - b[:, 0][None, :]
    dy = a[:, 1][:, None] - b[:, 1][None, :]
    return (dx * dx + dy * dy).min(axis=1)


def hausdorff(a: np.ndarray, b: np.ndarray, calibration: float | None = None) -> float:
    """Symmetric worst-case nearest-point distance between two contours."""
    a, b = _point_set(a), _point_set(b)
    d = np.sqrt(max(_min_sq_dists(a, b).max(), _min_sq_dists(b, a).max()))
    return float(d) * (calibration if calibration else 1.0)


def mad(a: np.ndarray, b: np.ndarray, calibration: float | None = None) -> float:
    """Mean distance from each point of the automatic contour ``a`` to the
    reference contour ``b`` (asymmetric by definition)."""
    a, b = _point_set(a), _point_set(b)
    d = float(np.mean(np.sqrt(_min_sq_dists(a, b))))
    return d * (calibration if calibration else 1.0)
