# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twins of the pure-numpy kernels.

The arithmetic mirrors the fallback expression-for-expression so that both
backends return identical labels and counts.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()


def glcm_counts(levels, valid, int dx, int dy, int g):
    cdef cnp.ndarray[cnp.int32_t, ndim=2, mode="c"] lv = np.ascontiguousarray(levels, dtype=np.int32)
    cdef cnp.ndarray[cnp.uint8_t, ndim=2, mode="c"] vm = np.ascontiguousarray(valid, dtype=np.uint8)
    cdef cnp.ndarray[cnp.int64_t, ndim=2, mode="c"] counts = np.zeros((g, g), dtype=np.int64)
    cdef int h = lv.shape[0]
    cdef int w = lv.shape[1]
    cdef int ys = -dy if dy < 0 else 0
    cdef int ye = h - dy if dy > 0 else h
    cdef int xs = -dx if dx < 0 else 0
    cdef int xe = w - dx if dx > 0 else w
    cdef int x, y, a, b
    for y in range(ys, ye):
        for x in range(xs, xe):
            if vm[y, x] and vm[y + dy, x + dx]:
                a = lv[y, x]
                b = lv[y + dy, x + dx]
                counts[a, b] += 1
                counts[b, a] += 1
    return counts


def slic_assign(lab, xs, ys, centers, double spatial_weight, int window):
    cdef cnp.ndarray[cnp.float64_t, ndim=3, mode="c"] lb = np.ascontiguousarray(lab, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] gx = np.ascontiguousarray(xs, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] gy = np.ascontiguousarray(ys, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] ct = np.ascontiguousarray(centers, dtype=np.float64)
    cdef int h = lb.shape[1]
    cdef int w = lb.shape[2]
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] best_d = np.full((h, w), np.inf, dtype=np.float64)
    cdef cnp.ndarray[cnp.int32_t, ndim=2, mode="c"] labels = np.full((h, w), -1, dtype=np.int32)
    cdef int k = ct.shape[0]
    cdef int ci, x0, x1, y0, y1, x, y
    cdef double cl, ca, cb, cx, cy, dl, da, db, dx, dy, d
    for ci in range(k):
        cl = ct[ci, 0]
        ca = ct[ci, 1]
        cb = ct[ci, 2]
        cx = ct[ci, 3]
        cy = ct[ci, 4]
        x0 = <int>floor(cx) - window
        if x0 < 0:
            x0 = 0
        x1 = <int>floor(cx) + window + 1
        if x1 > w:
            x1 = w
        y0 = <int>floor(cy) - window
        if y0 < 0:
            y0 = 0
        y1 = <int>floor(cy) + window + 1
        if y1 > h:
            y1 = h
        if x0 >= x1 or y0 >= y1:
            continue
        for y in range(y0, y1):
            for x in range(x0, x1):
                dl = lb[0, y, x] - cl
                da = lb[1, y, x] - ca
                db = lb[2, y, x] - cb
                dx = gx[y, x] - cx
                dy = gy[y, x] - cy
                d = dl * dl + da * da + db * db + spatial_weight * (dx * dx + dy * dy)
                if d < best_d[y, x]:
                    best_d[y, x] = d
                    labels[y, x] = ci
    return labels, best_d
