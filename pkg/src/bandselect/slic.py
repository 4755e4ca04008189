"""SLIC superpixel segmentation in CIELAB+xy space.

Local k-means over (L, a, b, x, y) with the fixed-S distance
D = sqrt(d_lab^2 + (m/S)^2 * d_xy^2), S = sqrt(N/k). Cluster centers start
on a regular grid, perturbed to the lowest-gradient pixel of their 3x3
neighborhood; each center searches a 2S x 2S window. The algorithm is fully
deterministic, so the seed argument only participates in the interface.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from ._kernels import slic_assign
from .errors import RasterFormatError
from .raster import MultibandRaster

DEFAULT_PX_PER_SEGMENT = 350


@dataclass(frozen=True)
class SlicConfig:
    k: int
    m: float = 10.0
    max_iter: int = 10
    min_region_frac: float = 0.25

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.m <= 0:
            raise ValueError("m must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0.0 < self.min_region_frac < 1.0:
            raise ValueError("min_region_frac must lie in (0, 1)")


@dataclass(frozen=True)
class SuperpixelMap:
    labels: np.ndarray
    n_segments: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int32)
        if labels.ndim != 2:
            raise ValueError("labels must be 2-D")
        if labels.min() < 0 or labels.max() >= self.n_segments:
            raise ValueError("labels must lie in [0, n_segments)")
        object.__setattr__(self, "labels", labels)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


def default_k(width: int, height: int, px_per_segment: int = DEFAULT_PX_PER_SEGMENT) -> int:
    """Superpixel count targeting a mean segment area of ``px_per_segment``."""
    return max(1, round(width * height / px_per_segment))


_SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_WHITE = np.array([0.95047, 1.0, 1.08883])


def to_lab(composite: MultibandRaster) -> MultibandRaster:
    """sRGB (D65) to CIELAB, treating a [0,1] 3-band composite as sRGB."""
    if composite.bands != 3:
        raise RasterFormatError(f"Lab conversion needs exactly 3 bands, got {composite.bands}")
    rgb = composite.data.astype(np.float64)
    lin = np.where(rgb <= 0.04045, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4)
    xyz = np.einsum("ij,jhw->ihw", _SRGB_TO_XYZ, lin)
    t = xyz / _WHITE[:, None, None]
    delta = 6.0 / 29.0
    f = np.where(t > delta**3, np.cbrt(t), t / (3 * delta**2) + 4.0 / 29.0)
    L = 116.0 * f[1] - 16.0
    a = 500.0 * (f[0] - f[1])
    b = 200.0 * (f[1] - f[2])
    return MultibandRaster(
        data=np.stack([L, a, b]).astype(np.float32), band_names=("L", "a", "b")
    )


def _sobel_magnitude(plane: np.ndarray) -> np.ndarray:
    gx = ndimage.sobel(plane, axis=1, mode="nearest")
    gy = ndimage.sobel(plane, axis=0, mode="nearest")
    return np.hypot(gx, gy)


def _init_centers(lab: np.ndarray, k: int) -> np.ndarray:
    """Regular-grid centers moved to the lowest-gradient pixel in a 3x3 patch."""
    h, w = lab.shape[1], lab.shape[2]
    s = np.sqrt(h * w / k)
    nx = max(1, round(w / s))
    ny = max(1, round(h / s))
    grad = _sobel_magnitude(lab[0])
    centers = []
    for j in range(ny):
        for i in range(nx):
            cx = int((i + 0.5) * w / nx)
            cy = int((j + 0.5) * h / ny)
            cx = min(cx, w - 1)
            cy = min(cy, h - 1)
            x0, x1 = max(0, cx - 1), min(w, cx + 2)
            y0, y1 = max(0, cy - 1), min(h, cy + 2)
            patch = grad[y0:y1, x0:x1]
            dy, dx = np.unravel_index(int(np.argmin(patch)), patch.shape)
            px, py = x0 + dx, y0 + dy
            centers.append([lab[0, py, px], lab[1, py, px], lab[2, py, px], float(px), float(py)])
    return np.array(centers, dtype=np.float64)


def slic_segment(lab: MultibandRaster, cfg: SlicConfig, seed: int = 0) -> SuperpixelMap:
    """Segment a Lab raster into superpixels and enforce 4-connectivity."""
    h, w = lab.height, lab.width
    n = h * w
    if cfg.k > n:
        raise ValueError(f"k={cfg.k} exceeds pixel count {n}")
    data = lab.data.astype(np.float64)
    s = float(np.sqrt(n / cfg.k))
    spatial_weight = (cfg.m / s) ** 2
    window = max(1, int(np.ceil(s)))
    ys_grid, xs_grid = np.mgrid[0:h, 0:w].astype(np.float64)
    centers = _init_centers(data, cfg.k)

    labels = np.zeros((h, w), dtype=np.int32)
    for _ in range(cfg.max_iter):
        labels, _ = slic_assign(data, xs_grid, ys_grid, centers, spatial_weight, window)
        # A center grid coarser than the window cannot strand pixels, but be
        # safe: unreached pixels go to the spatially nearest center.
        orphan = labels < 0
        if orphan.any():
            oy, ox = np.nonzero(orphan)
            d2 = (ox[:, None] - centers[None, :, 3]) ** 2 + (oy[:, None] - centers[None, :, 4]) ** 2
            labels[oy, ox] = np.argmin(d2, axis=1).astype(np.int32)
        flat = labels.ravel()
        counts = np.bincount(flat, minlength=centers.shape[0]).astype(np.float64)
        occupied = counts > 0
        new_centers = centers.copy()
        for c, values in enumerate((data[0], data[1], data[2], xs_grid, ys_grid)):
            sums = np.bincount(flat, weights=values.ravel(), minlength=centers.shape[0])
            new_centers[occupied, c] = sums[occupied] / counts[occupied]
        move = np.hypot(
            new_centers[:, 3] - centers[:, 3], new_centers[:, 4] - centers[:, 4]
        ).max()
        centers = new_centers
        if move < 1e-3 * s:
            break

    raw = SuperpixelMap(labels=labels, n_segments=int(labels.max()) + 1)
    return enforce_connectivity(raw, cfg)


def _connected_components(labels: np.ndarray) -> tuple[np.ndarray, int]:
    """Split each label into its 4-connected components, ids by scan order."""
    h, w = labels.shape
    comp = np.full((h, w), -1, dtype=np.int32)
    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
    next_id = 0
    objects = ndimage.find_objects(labels + 1)
    for seg, sl in enumerate(objects):
        if sl is None:
            continue
        mask = labels[sl] == seg
        cc, n_cc = ndimage.label(mask, structure=structure)
        sub = comp[sl]
        for local in range(1, n_cc + 1):
            sub[cc == local] = next_id
            next_id += 1
    return comp, next_id


def enforce_connectivity(spmap: SuperpixelMap, cfg: SlicConfig) -> SuperpixelMap:
    """Absorb under-sized connected components into their largest neighbor.

    Any 4-connected component smaller than min_region_frac * (N / k) is merged
    into the adjacent component with the largest current area (ties to the
    lowest id); labels are then re-compacted in scan order.
    """
    labels = spmap.labels
    h, w = labels.shape
    n = h * w
    threshold = cfg.min_region_frac * (n / cfg.k)

    comp, n_comp = _connected_components(labels)
    areas = np.bincount(comp.ravel(), minlength=n_comp).astype(np.int64)

    pairs = set()
    right = np.stack([comp[:, :-1].ravel(), comp[:, 1:].ravel()], axis=1)
    down = np.stack([comp[:-1, :].ravel(), comp[1:, :].ravel()], axis=1)
    for arr in (right, down):
        diff = arr[arr[:, 0] != arr[:, 1]]
        lo = np.minimum(diff[:, 0], diff[:, 1])
        hi = np.maximum(diff[:, 0], diff[:, 1])
        pairs.update(map(tuple, np.unique(np.stack([lo, hi], axis=1), axis=0)))
    adjacency: list[set[int]] = [set() for _ in range(n_comp)]
    for a, b in pairs:
        adjacency[a].add(b)
        adjacency[b].add(a)

    parent = np.arange(n_comp)

    def find(c: int) -> int:
        while parent[c] != c:
            parent[c] = parent[parent[c]]
            c = parent[c]
        return c

    changed = True
    while changed:
        changed = False
        order = sorted(range(n_comp), key=lambda c: (areas[find(c)], find(c)))
        for c in order:
            root = find(c)
            if areas[root] >= threshold:
                continue
            neighbor_roots = {find(nb) for nb in adjacency[c]} - {root}
            if not neighbor_roots:
                continue
            target = max(neighbor_roots, key=lambda r: (areas[r], -r))
            parent[root] = target
            areas[target] += areas[root]
            areas[root] = 0
            changed = True

    roots = np.array([find(c) for c in range(n_comp)], dtype=np.int64)
    merged = roots[comp]
    uniq, first_idx = np.unique(merged.ravel(), return_index=True)
    scan_order = uniq[np.argsort(first_idx)]
    rank = {int(root): i for i, root in enumerate(scan_order)}
    compact = np.array([rank[int(r)] for r in roots], dtype=np.int32)
    out = compact[comp]
    return SuperpixelMap(labels=out, n_segments=len(uniq))


def save_superpixels(spmap: SuperpixelMap, path) -> None:
    """Persist labels as row-major little-endian uint32 plus meta.json."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    meta = {"width": spmap.width, "height": spmap.height, "n_segments": spmap.n_segments}
    (root / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    (root / "labels.u32").write_bytes(
        np.ascontiguousarray(spmap.labels, dtype="<u4").tobytes()
    )


def load_superpixels(path) -> SuperpixelMap:
    root = Path(path)
    meta = json.loads((root / "meta.json").read_text())
    w, h = int(meta["width"]), int(meta["height"])
    raw = (root / "labels.u32").read_bytes()
    if len(raw) != w * h * 4:
        raise RasterFormatError(f"{root}: labels.u32 has {len(raw)} bytes, expected {w * h * 4}")
    labels = np.frombuffer(raw, dtype="<u4").reshape(h, w).astype(np.int32)
    return SuperpixelMap(labels=labels, n_segments=int(meta["n_segments"]))
