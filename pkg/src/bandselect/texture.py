"""Gray-level co-occurrence matrices and the 13 classical texture descriptors.

Per segment and per channel: values are min-max quantized over the segment's
own pixels (so any positive-scale affine change of the raw values leaves the
features untouched), co-occurrence is accumulated symmetrically in four
directions at distance 1 over pixel pairs fully inside the segment, and the
13 descriptors are computed per direction. Logarithms are base 2 with
0*log(0) := 0; degenerate denominators yield 0.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._kernels import glcm_counts
from .errors import NoPairsError, RasterFormatError
from .raster import MultibandRaster

DIRECTIONS = (0, 45, 90, 135)
# (dx, dy) per direction, y axis pointing down; symmetric accumulation makes
# the opposite offset equivalent.
DIRECTION_OFFSETS = {0: (1, 0), 45: (1, -1), 90: (0, -1), 135: (-1, -1)}
N_FEATURES = 13
FEATURE_NAMES = (
    "asm",
    "contrast",
    "correlation",
    "variance",
    "idm",
    "sum_average",
    "sum_variance",
    "sum_entropy",
    "entropy",
    "difference_variance",
    "difference_entropy",
    "imc1",
    "imc2",
)


@dataclass(frozen=True)
class Glcm:
    """Normalized symmetric co-occurrence matrix for one direction."""

    levels: int
    matrix: np.ndarray
    direction: int
    distance: int = 1

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (self.levels, self.levels):
            raise ValueError(f"matrix shape {m.shape} != ({self.levels}, {self.levels})")
        total = m.sum()
        if total <= 0:
            raise NoPairsError("GLCM must contain at least one pair")
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"GLCM entries sum to {total}, expected 1")
        object.__setattr__(self, "matrix", m)


def quantize(values: np.ndarray, levels: int) -> np.ndarray:
    """Linear min-max quantization of a segment's values into [0, levels).

    The segment maximum maps to the top level; a constant segment maps
    everything to level 0.
    """
    if levels < 2:
        raise ValueError("levels must be >= 2")
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("cannot quantize an empty segment")
    lo = v.min()
    hi = v.max()
    if hi == lo:
        return np.zeros(v.shape, dtype=np.int32)
    q = np.floor((v - lo) / (hi - lo) * levels).astype(np.int32)
    return np.minimum(q, levels - 1)


def glcm(qseg: np.ndarray, valid: np.ndarray, direction: int, levels: int, distance: int = 1) -> Glcm:
    """Accumulate the symmetric GLCM for one direction over a masked patch.

    ``qseg`` holds quantized levels on the segment's bounding-box grid and
    ``valid`` marks segment membership; pairs with either endpoint outside
    the segment are ignored. Raises :class:`NoPairsError` when the direction
    admits no pair.
    """
    if direction not in DIRECTION_OFFSETS:
        raise ValueError(f"direction {direction} not in {DIRECTIONS}")
    dx, dy = DIRECTION_OFFSETS[direction]
    counts = glcm_counts(qseg, valid, dx * distance, dy * distance, levels)
    total = int(counts.sum())
    if total == 0:
        raise NoPairsError(f"no co-occurring pair in direction {direction}")
    return Glcm(levels=levels, matrix=counts / total, direction=direction, distance=distance)


def _entropy2(p: np.ndarray) -> float:
    nz = p > 0
    return float(-(p[nz] * np.log2(p[nz])).sum())


def haralick13(g: Glcm) -> np.ndarray:
    """The 13 classical descriptors of a normalized symmetric GLCM.

    Order: ASM, contrast, correlation, variance, inverse difference moment,
    sum average, sum variance, sum entropy, entropy, difference variance,
    difference entropy, and the two information measures of correlation.
    Levels are 0-based; sum variance is taken around the sum average.
    """
    p = g.matrix
    n = g.levels
    i = np.arange(n, dtype=np.float64)
    px = p.sum(axis=1)
    py = p.sum(axis=0)

    p_sum = np.zeros(2 * n - 1, dtype=np.float64)
    p_diff = np.zeros(n, dtype=np.float64)
    idx = np.add.outer(np.arange(n), np.arange(n))
    np.add.at(p_sum, idx.ravel(), p.ravel())
    didx = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    np.add.at(p_diff, didx.ravel(), p.ravel())

    out = np.empty(N_FEATURES, dtype=np.float64)
    out[0] = float((p * p).sum())

    k_diff = np.arange(n, dtype=np.float64)
    out[1] = float((k_diff * k_diff * p_diff).sum())

    mu_x = float((i * px).sum())
    mu_y = float((i * py).sum())
    var_x = float((i * i * px).sum()) - mu_x * mu_x
    var_y = float((i * i * py).sum()) - mu_y * mu_y
    if var_x <= 0 or var_y <= 0:
        out[2] = 0.0
    else:
        ij_mean = float((np.outer(i, i) * p).sum())
        out[2] = (ij_mean - mu_x * mu_y) / np.sqrt(var_x * var_y)

    out[3] = float(((i - mu_x) ** 2 @ px))

    diff_sq = np.subtract.outer(i, i) ** 2
    out[4] = float((p / (1.0 + diff_sq)).sum())

    k_sum = np.arange(2 * n - 1, dtype=np.float64)
    out[5] = float((k_sum * p_sum).sum())
    out[6] = float(((k_sum - out[5]) ** 2 * p_sum).sum())
    out[7] = _entropy2(p_sum)
    out[8] = _entropy2(p.ravel())

    mu_d = float((k_diff * p_diff).sum())
    out[9] = float(((k_diff - mu_d) ** 2 * p_diff).sum())
    out[10] = _entropy2(p_diff)

    hx = _entropy2(px)
    hy = _entropy2(py)
    hxy = out[8]
    pxpy = np.outer(px, py)
    nz = (p > 0) & (pxpy > 0)
    hxy1 = float(-(p[nz] * np.log2(pxpy[nz])).sum())
    hxy2 = _entropy2(pxpy.ravel())
    denom = max(hx, hy)
    out[11] = (hxy - hxy1) / denom if denom > 0 else 0.0
    out[12] = float(np.sqrt(max(0.0, 1.0 - np.exp(-2.0 * (hxy2 - hxy)))))
    return out


def patch_features(
    values: np.ndarray, valid: np.ndarray, levels: int, direction_mean: bool = False
) -> np.ndarray:
    """Quantize one masked patch and compute its per-direction descriptors.

    Returns 52 values (direction-major: 13 per direction in DIRECTIONS order)
    or the 13-value direction average when ``direction_mean`` is set.
    Directions with no pair contribute a zero block and are excluded from the
    average.
    """
    q = np.zeros(values.shape, dtype=np.int32)
    q[valid] = quantize(values[valid], levels)
    blocks = []
    present = []
    for direction in DIRECTIONS:
        try:
            g = glcm(q, valid, direction, levels)
        except NoPairsError:
            blocks.append(np.zeros(N_FEATURES, dtype=np.float64))
            present.append(False)
        else:
            blocks.append(haralick13(g))
            present.append(True)
    if direction_mean:
        kept = [b for b, ok in zip(blocks, present) if ok]
        if not kept:
            return np.zeros(N_FEATURES, dtype=np.float64)
        return np.mean(kept, axis=0)
    return np.concatenate(blocks)


def segment_features(
    raster: MultibandRaster,
    pixels: np.ndarray,
    levels: int = 64,
    direction_mean: bool = False,
) -> np.ndarray:
    """Per-channel descriptor blocks for one segment.

    ``pixels`` is an (n, 2) array of (x, y) coordinates. Returns an array of
    shape (bands, 52) - or (bands, 13) in direction-averaged mode - with
    channels in the raster's band order.
    """
    pixels = np.asarray(pixels, dtype=np.int64)
    if pixels.ndim != 2 or pixels.shape[1] != 2 or pixels.shape[0] == 0:
        raise ValueError("pixels must be a nonempty (n, 2) array of (x, y)")
    xs, ys = pixels[:, 0], pixels[:, 1]
    if (xs < 0).any() or (ys < 0).any() or (xs >= raster.width).any() or (ys >= raster.height).any():
        raise ValueError("segment pixels fall outside the raster")
    x0, x1 = int(xs.min()), int(xs.max()) + 1
    y0, y1 = int(ys.min()), int(ys.max()) + 1
    valid = np.zeros((y1 - y0, x1 - x0), dtype=bool)
    valid[ys - y0, xs - x0] = True
    width = N_FEATURES if direction_mean else N_FEATURES * len(DIRECTIONS)
    out = np.empty((raster.bands, width), dtype=np.float64)
    for b in range(raster.bands):
        patch = raster.data[b, y0:y1, x0:x1].astype(np.float64)
        out[b] = patch_features(patch, valid, levels, direction_mean)
    return out


@dataclass
class FeatureTable:
    """Per-segment descriptor blocks for a fixed channel list."""

    channels: tuple[str, ...]
    segment_ids: np.ndarray
    region_ids: np.ndarray
    labels: np.ndarray  # 0 forest, 1 non-forest
    blocks: np.ndarray  # (rows, channels, block_width) float64

    def __post_init__(self):
        self.channels = tuple(self.channels)
        if self.blocks.shape[1] != len(self.channels):
            raise ValueError("blocks second axis must match channel count")

    @property
    def block_width(self) -> int:
        return self.blocks.shape[2]

    def matrix(self, channels: list[str]) -> np.ndarray:
        """Concatenate the named channels' blocks into a design matrix."""
        idx = []
        for name in channels:
            if name not in self.channels:
                raise KeyError(f"channel {name!r} not in table {self.channels}")
            idx.append(self.channels.index(name))
        return self.blocks[:, idx, :].reshape(self.blocks.shape[0], -1)

    def rows_for_regions(self, regions) -> "FeatureTable":
        keep = np.isin(self.region_ids, list(regions))
        return FeatureTable(
            channels=self.channels,
            segment_ids=self.segment_ids[keep],
            region_ids=self.region_ids[keep],
            labels=self.labels[keep],
            blocks=self.blocks[keep],
        )


def save_feature_table_jsonl(table: FeatureTable, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for r in range(table.blocks.shape[0]):
            rec = {
                "segment_id": int(table.segment_ids[r]),
                "region_id": int(table.region_ids[r]),
                "label": "non-forest" if table.labels[r] else "forest",
                "features": {
                    ch: [float(v) for v in table.blocks[r, c]]
                    for c, ch in enumerate(table.channels)
                },
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_feature_table_jsonl(path) -> FeatureTable:
    seg_ids, reg_ids, labels, rows = [], [], [], []
    channels = None
    with Path(path).open() as fh:
        for line in fh:
            rec = json.loads(line)
            if channels is None:
                channels = tuple(sorted(rec["features"], key=_channel_sort_key))
            seg_ids.append(rec["segment_id"])
            reg_ids.append(rec["region_id"])
            labels.append(1 if rec["label"] == "non-forest" else 0)
            rows.append(np.array([rec["features"][ch] for ch in channels], dtype=np.float64))
    if channels is None:
        raise RasterFormatError(f"{path}: empty feature table")
    return FeatureTable(
        channels=channels,
        segment_ids=np.array(seg_ids, dtype=np.int64),
        region_ids=np.array(reg_ids, dtype=np.int64),
        labels=np.array(labels, dtype=np.int64),
        blocks=np.stack(rows),
    )


def _channel_sort_key(name: str):
    # Keeps B1..B7 first in band order, then derived channels alphabetically.
    if len(name) == 2 and name[0] == "B" and name[1].isdigit():
        return (0, int(name[1]))
    return (1, name)


_BIN_MAGIC = b"BSFT\x01\n"


def save_feature_table_binary(table: FeatureTable, path) -> None:
    """Compact alternative: JSON header + raw float32 rows."""
    header = {
        "channels": list(table.channels),
        "block_width": table.block_width,
        "rows": int(table.blocks.shape[0]),
        "segment_ids": [int(v) for v in table.segment_ids],
        "region_ids": [int(v) for v in table.region_ids],
        "labels": [int(v) for v in table.labels],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(_BIN_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(table.blocks, dtype="<f4").tobytes())


def load_feature_table_binary(path) -> FeatureTable:
    raw = Path(path).read_bytes()
    if raw[: len(_BIN_MAGIC)] != _BIN_MAGIC:
        raise RasterFormatError(f"{path}: bad feature-table magic")
    off = len(_BIN_MAGIC)
    (hlen,) = struct.unpack_from("<I", raw, off)
    off += 4
    header = json.loads(raw[off : off + hlen].decode("utf-8"))
    off += hlen
    rows = header["rows"]
    nch = len(header["channels"])
    bw = header["block_width"]
    data = np.frombuffer(raw, dtype="<f4", count=rows * nch * bw, offset=off)
    return FeatureTable(
        channels=tuple(header["channels"]),
        segment_ids=np.array(header["segment_ids"], dtype=np.int64),
        region_ids=np.array(header["region_ids"], dtype=np.int64),
        labels=np.array(header["labels"], dtype=np.int64),
        blocks=data.reshape(rows, nch, bw).astype(np.float64),
    )
