"""Pure-numpy kernels, the fallback when the compiled extension is absent.

Both backends must produce identical results: GLCM counts are exact integers,
and the SLIC assignment evaluates the same float64 expression per pixel, so
labels agree bit-for-bit with the compiled twin.
"""

from __future__ import annotations

import numpy as np


def glcm_counts(levels: np.ndarray, valid: np.ndarray, dx: int, dy: int, g: int) -> np.ndarray:
    """Symmetric co-occurrence counts over pairs fully inside the valid mask.

    ``levels`` is an (h, w) int32 patch of quantized values, ``valid`` the
    boolean segment mask on the same grid. Returns (g, g) int64 counts with
    both (i, j) and (j, i) accumulated per pair.
    """
    levels = np.ascontiguousarray(levels, dtype=np.int32)
    valid = np.ascontiguousarray(valid, dtype=bool)
    h, w = levels.shape
    ys, ye = max(0, -dy), min(h, h - dy)
    xs, xe = max(0, -dx), min(w, w - dx)
    counts = np.zeros((g, g), dtype=np.int64)
    if ys >= ye or xs >= xe:
        return counts
    src_valid = valid[ys:ye, xs:xe]
    dst_valid = valid[ys + dy : ye + dy, xs + dx : xe + dx]
    both = src_valid & dst_valid
    a = levels[ys:ye, xs:xe][both].astype(np.int64)
    b = levels[ys + dy : ye + dy, xs + dx : xe + dx][both].astype(np.int64)
    flat = np.bincount(a * g + b, minlength=g * g) + np.bincount(b * g + a, minlength=g * g)
    return flat.reshape(g, g).astype(np.int64)


def slic_assign(
    lab: np.ndarray,
    xs: np.ndarray,
    ys: np.ndarray,
    centers: np.ndarray,
    spatial_weight: float,
    window: int,
) -> tuple[np.ndarray, np.ndarray]:
    """One SLIC assignment sweep: nearest center in Labxy within each window.

    ``lab`` is (3, h, w) float64, ``centers`` (k, 5) float64 rows
    (L, a, b, x, y). Distance is d_lab^2 + spatial_weight * d_xy^2; a pixel
    updates only on strict improvement, centers visited in index order.
    Returns (labels int32 with -1 for unreached pixels, best squared distance).
    """
    h, w = lab.shape[1], lab.shape[2]
    best_d = np.full((h, w), np.inf, dtype=np.float64)
    labels = np.full((h, w), -1, dtype=np.int32)
    L, A, B = lab[0], lab[1], lab[2]
    for ci in range(centers.shape[0]):
        cl, ca, cb, cx, cy = centers[ci]
        x0 = max(0, int(np.floor(cx)) - window)
        x1 = min(w, int(np.floor(cx)) + window + 1)
        y0 = max(0, int(np.floor(cy)) - window)
        y1 = min(h, int(np.floor(cy)) + window + 1)
        if x0 >= x1 or y0 >= y1:
            continue
        dl = L[y0:y1, x0:x1] - cl
        da = A[y0:y1, x0:x1] - ca
        db = B[y0:y1, x0:x1] - cb
        dx = xs[y0:y1, x0:x1] - cx
        dy = ys[y0:y1, x0:x1] - cy
        d = dl * dl + da * da + db * db + spatial_weight * (dx * dx + dy * dy)
        win_best = best_d[y0:y1, x0:x1]
        better = d < win_best
        win_best[better] = d[better]
        labels[y0:y1, x0:x1][better] = ci
    return labels, best_d
