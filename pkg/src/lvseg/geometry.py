"""Planar geometry for mask measurement: boundary tracing, convex hulls,
and minimum-area enclosing triangles.

Points are (x, y) = (column, row) pixel coordinates; polygons are (n, 2)
float arrays ordered counterclockwise in the mathematical sense (positive
shoelace area).
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy import ndimage

from .errors import MeasurementError

# Moore neighborhood in clockwise order starting north, as (row, col) offsets.
_RING = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))
_RING_INDEX = {off: i for i, off in enumerate(_RING)}


def signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _moore_trace(mask: np.ndarray, start: tuple[int, int]) -> list[tuple[int, int]]:
    """Boundary walk with Jacob's stopping criterion: terminate when the
    start pixel is about to repeat its first move."""
    h, w = mask.shape

    def fg(r: int, c: int) -> bool:
        return 0 <= r < h and 0 <= c < w and bool(mask[r, c])

    contour = [start]
    cur = start
    back_idx = 6  # entered the start pixel from the west during the scan
    first_move = None
    for _ in range(8 * mask.size + 8):
        found = None
        for step in range(1, 9):
            idx = (back_idx + step) % 8
            nxt = (cur[0] + _RING[idx][0], cur[1] + _RING[idx][1])
            if fg(*nxt):
                found = (nxt, idx, step)
                break
        if found is None:
            return contour  # isolated pixel
        nxt, idx, step = found
        if cur == start and first_move == (nxt, idx):
            contour.pop()  # drop the closing revisit of the start pixel
            return contour
        if first_move is None:
            first_move = (nxt, idx)
        contour.append(nxt)
        prev_off = _RING[(back_idx + step - 1) % 8]
        back_pos = (cur[0] + prev_off[0], cur[1] + prev_off[1])
        back_idx = _RING_INDEX[(back_pos[0] - nxt[0], back_pos[1] - nxt[1])]
        cur = nxt
    raise MeasurementError("boundary trace failed to close")  # pragma: no cover


def extract_contour(mask: np.ndarray) -> np.ndarray:
    """Closed Moore boundary of the mask's foreground as an (n, 2) polygon.

    The mask should hold a single 4-connected component; if several are
    present the largest is traced and a warning is issued.
    """
    m = np.asarray(mask)
    if m.ndim != 2:
        raise MeasurementError(f"mask must be 2-D, got shape {m.shape}")
    binary = m > 0
    if not binary.any():
        raise MeasurementError("cannot trace the contour of an empty mask")
    labels, count = ndimage.label(binary, structure=[[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    if count > 1:
        warnings.warn(f"mask has {count} components; tracing the largest", stacklevel=2)
        sizes = ndimage.sum_labels(binary, labels, index=range(1, count + 1))
        binary = labels == (int(np.argmax(sizes)) + 1)
    rows, cols = np.nonzero(binary)
    start = (int(rows[0]), int(cols[0]))  # topmost, then leftmost

    trace = _moore_trace(binary, start)
    poly = np.array([(c, r) for r, c in trace], dtype=np.float64)
    if len(poly) >= 3 and signed_area(poly) < 0:
        poly = poly[::-1].copy()
    return poly


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Counterclockwise convex hull with collinear triples dropped
    (monotone chain)."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise MeasurementError(f"points must be (n, 2), got {pts.shape}")
    uniq = sorted(set(map(tuple, pts.tolist())))
    if len(uniq) < 3:
        raise MeasurementError(f"convex hull needs >= 3 distinct points, have {len(uniq)}")

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[tuple[float, float]] = []
    for p in uniq:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(uniq):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise MeasurementError("points are collinear; hull is degenerate")
    return np.array(hull, dtype=np.float64)


def _line_intersection(n1, c1, n2, c2):
    det = n1[0] * n2[1] - n1[1] * n2[0]
    if abs(det) < 1e-14:
        return None
    x = (c1 * n2[1] - c2 * n1[1]) / det
    y = (n1[0] * c2 - n2[0] * c1) / det
    return np.array([x, y])


def _triangle_area(tri: np.ndarray) -> float:
    a, b, c = tri
    return 0.5 * abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))


def _contains(tri: np.ndarray, pts: np.ndarray, tol: float) -> bool:
    if signed_area(tri) < 0:
        tri = tri[::-1]
    for k in range(3):
        a, b = tri[k], tri[(k + 1) % 3]
        e = b - a
        if np.min(e[0] * (pts[:, 1] - a[1]) - e[1] * (pts[:, 0] - a[0])) < -tol:
            return False
    return True


def min_enclosing_triangle(hull: np.ndarray) -> np.ndarray:
    """Minimum-area triangle containing a convex polygon.

    Exploits the classical structure of the optimum: at least one side is
    flush with a hull edge and every non-flush side touches the hull at
    the side's midpoint. Candidates are enumerated from the resulting
    finite families (three flush sides; two flush sides plus a
    midpoint-vertex side; one flush side plus two midpoint vertices at
    equal support height) and the smallest valid triangle is returned,
    vertices counterclockwise.
    """
    hull = convex_hull(np.asarray(hull, dtype=np.float64))
    n = len(hull)
    edges = np.roll(hull, -1, axis=0) - hull
    # inward normals of a CCW polygon point left of each directed edge
    normals = np.stack([-edges[:, 1], edges[:, 0]], axis=1)
    norms = np.linalg.norm(normals, axis=1)
    normals = normals / norms[:, None]
    offsets = np.einsum("ij,ij->i", normals, hull)

    scale = float(np.max(np.ptp(hull, axis=0)))
    tol = 1e-9 * max(scale, 1.0)

    best_area = np.inf
    best_tri = None

    def consider(tri):
        nonlocal best_area, best_tri
        area = _triangle_area(tri)
        if area < best_area - 1e-15 and area > tol and _contains(tri, hull, tol):
            best_area = area
            best_tri = tri

    # family 1: three flush sides
    for i in range(n):
        for j in range(i + 1, n):
            q_ij = _line_intersection(normals[i], offsets[i], normals[j], offsets[j])
            if q_ij is None:
                continue
            for k in range(j + 1, n):
                q_ik = _line_intersection(normals[i], offsets[i], normals[k], offsets[k])
                q_jk = _line_intersection(normals[j], offsets[j], normals[k], offsets[k])
                if q_ik is None or q_jk is None:
                    continue
                consider(np.array([q_ij, q_ik, q_jk]))

    # family 2: two flush sides, third side bisected by a hull vertex
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            q = _line_intersection(normals[i], offsets[i], normals[j], offsets[j])
            if q is None:
                continue
            for w in hull:
                # X on line i, Y on line j, with w the midpoint of X-Y
                y = _line_intersection(normals[j], offsets[j], normals[i],
                                       2.0 * float(np.dot(normals[i], w)) - offsets[i])
                if y is None:
                    continue
                x = 2.0 * w - y
                consider(np.array([q, x, y]))

    # family 3: one flush side, both other sides bisected by hull vertices
    # at (numerically) equal support height; all members share one area,
    # so sampling the apex along its line suffices.
    heights = hull @ normals.T - offsets[None, :]  # height of vertex v over edge line i
    for i in range(n):
        h_i = heights[:, i]
        for a in range(n):
            if h_i[a] <= tol:
                continue
            for b in range(a + 1, n):
                if abs(h_i[a] - h_i[b]) > 1e-7 * max(scale, 1.0):
                    continue
                u, v = hull[a], hull[b]
                h = 0.5 * (h_i[a] + h_i[b])
                mid = 0.5 * (u + v)
                foot = mid + normals[i] * (2.0 * h - (float(np.dot(normals[i], mid)) - offsets[i]))
                tangent = np.array([-normals[i][1], normals[i][0]])
                for t in np.linspace(-2.0 * scale, 2.0 * scale, 41):
                    c = foot + t * tangent
                    consider(np.array([2.0 * u - c, 2.0 * v - c, c]))

    if best_tri is None:
        raise MeasurementError("no enclosing triangle found (degenerate hull?)")
    if signed_area(best_tri) < 0:
        best_tri = best_tri[::-1].copy()
    return best_tri
