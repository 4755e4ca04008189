"""Labeled segment dataset: homogeneity rate, filtering, region split.

A superpixel becomes a dataset record when its homogeneity rate
HoR = max(forest pixels, non-forest pixels) / total reaches ``min_hor`` and
its area reaches ``min_area`` (both thresholds inclusive). Superpixels that
touch any ignore pixel are dropped outright.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, UnassignedRegionError
from .raster import FOREST, IGNORE, NONFOREST, LabelMask
from .slic import SuperpixelMap

DEFAULT_MIN_HOR = 0.70
DEFAULT_MIN_AREA = 70

LABEL_NAMES = {FOREST: "forest", NONFOREST: "non-forest"}


@dataclass(frozen=True)
class SegmentRecord:
    region_id: int
    segment_id: int
    pixels: np.ndarray  # (n, 2) int64 (x, y)
    majority_label: int  # FOREST or NONFOREST
    hor: float

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.int64)
        if pixels.ndim != 2 or pixels.shape[1] != 2 or pixels.shape[0] == 0:
            raise ValueError("pixels must be a nonempty (n, 2) array")
        if not 0.5 <= self.hor <= 1.0:
            raise ValueError(f"hor {self.hor} outside [0.5, 1]")
        object.__setattr__(self, "pixels", pixels)

    @property
    def area(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class DatasetSplit:
    train: frozenset[int]
    validation: frozenset[int]
    test: frozenset[int]

    def __post_init__(self):
        train = frozenset(self.train)
        validation = frozenset(self.validation)
        test = frozenset(self.test)
        if not (train and validation and test):
            raise ValueError("each split set must be nonempty")
        if train & validation or train & test or validation & test:
            raise ValueError("split sets must be pairwise disjoint")
        object.__setattr__(self, "train", train)
        object.__setattr__(self, "validation", validation)
        object.__setattr__(self, "test", test)


def compute_hor(pixels: np.ndarray, mask: LabelMask) -> tuple[float, int]:
    """Homogeneity rate and majority class of a pixel set.

    Ties (equal class counts) resolve to forest with hor = 0.5.
    """
    pixels = np.asarray(pixels, dtype=np.int64)
    if pixels.size == 0:
        raise ValueError("empty pixel list")
    values = mask.labels[pixels[:, 1], pixels[:, 0]]
    if (values == IGNORE).any():
        raise ValueError("pixel set contains ignore-labelled pixels")
    nfp = int((values == FOREST).sum())
    nnp = int((values == NONFOREST).sum())
    hor = max(nfp, nnp) / (nfp + nnp)
    majority = FOREST if nfp >= nnp else NONFOREST
    return hor, majority


def build_segments(
    spmap: SuperpixelMap,
    mask: LabelMask,
    min_hor: float = DEFAULT_MIN_HOR,
    min_area: int = DEFAULT_MIN_AREA,
    region_id: int = 0,
) -> list[SegmentRecord]:
    """Records for every superpixel passing both filters, sorted by id."""
    if (spmap.width, spmap.height) != (mask.width, mask.height):
        raise DimensionMismatchError(
            f"superpixels {spmap.width}x{spmap.height} vs mask {mask.width}x{mask.height}"
        )
    labels = spmap.labels
    records = []
    order = np.argsort(labels.ravel(), kind="stable")
    flat_sorted = labels.ravel()[order]
    boundaries = np.searchsorted(flat_sorted, np.arange(spmap.n_segments + 1))
    h, w = labels.shape
    ys_all, xs_all = np.divmod(order, w)
    for seg in range(spmap.n_segments):
        lo, hi = boundaries[seg], boundaries[seg + 1]
        if lo == hi:
            continue
        xs = xs_all[lo:hi]
        ys = ys_all[lo:hi]
        if hi - lo < min_area:
            continue
        values = mask.labels[ys, xs]
        if (values == IGNORE).any():
            continue
        nfp = int((values == FOREST).sum())
        nnp = int((values == NONFOREST).sum())
        hor = max(nfp, nnp) / (nfp + nnp)
        if hor < min_hor:
            continue
        majority = FOREST if nfp >= nnp else NONFOREST
        pixels = np.stack([xs, ys], axis=1).astype(np.int64)
        records.append(
            SegmentRecord(
                region_id=region_id,
                segment_id=seg,
                pixels=pixels,
                majority_label=majority,
                hor=hor,
            )
        )
    return records


def split_records(
    records: list[SegmentRecord], split: DatasetSplit
) -> tuple[list[SegmentRecord], list[SegmentRecord], list[SegmentRecord]]:
    """Partition records by region, preserving order."""
    out: dict[str, list[SegmentRecord]] = {"train": [], "validation": [], "test": []}
    for rec in records:
        if rec.region_id in split.train:
            out["train"].append(rec)
        elif rec.region_id in split.validation:
            out["validation"].append(rec)
        elif rec.region_id in split.test:
            out["test"].append(rec)
        else:
            raise UnassignedRegionError(rec.region_id)
    return out["train"], out["validation"], out["test"]


def class_counts(records: list[SegmentRecord]) -> dict[str, int]:
    counts = {"forest": 0, "non-forest": 0}
    for rec in records:
        counts[LABEL_NAMES[rec.majority_label]] += 1
    return counts


def _encode_rle(rec: SegmentRecord) -> tuple[list[int], list[int]]:
    """Run lengths over the bbox in row-major order, starting outside."""
    xs, ys = rec.pixels[:, 0], rec.pixels[:, 1]
    x0, y0 = int(xs.min()), int(ys.min())
    bw = int(xs.max()) - x0 + 1
    bh = int(ys.max()) - y0 + 1
    grid = np.zeros(bh * bw, dtype=bool)
    grid[(ys - y0) * bw + (xs - x0)] = True
    runs = []
    pos = 0
    flips = np.flatnonzero(np.diff(grid))
    for flip in flips:
        runs.append(int(flip) + 1 - pos)
        pos = int(flip) + 1
    runs.append(grid.size - pos)
    if grid[0]:
        runs.insert(0, 0)
    return [x0, y0, bw, bh], runs


def _decode_rle(bbox: list[int], runs: list[int]) -> np.ndarray:
    x0, y0, bw, bh = bbox
    grid = np.zeros(bw * bh, dtype=bool)
    pos = 0
    inside = False
    for run in runs:
        if inside:
            grid[pos : pos + run] = True
        pos += run
        inside = not inside
    idx = np.flatnonzero(grid)
    ys, xs = np.divmod(idx, bw)
    return np.stack([xs + x0, ys + y0], axis=1).astype(np.int64)


def save_segments_jsonl(records: list[SegmentRecord], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for rec in records:
            bbox, runs = _encode_rle(rec)
            obj = {
                "region_id": rec.region_id,
                "segment_id": rec.segment_id,
                "area": rec.area,
                "majority_label": LABEL_NAMES[rec.majority_label],
                "hor": rec.hor,
                "bbox": bbox,
                "pixel_run_lengths": runs,
            }
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def load_segments_jsonl(path) -> list[SegmentRecord]:
    records = []
    name_to_label = {v: k for k, v in LABEL_NAMES.items()}
    with Path(path).open() as fh:
        for line in fh:
            obj = json.loads(line)
            pixels = _decode_rle(obj["bbox"], obj["pixel_run_lengths"])
            if pixels.shape[0] != obj["area"]:
                raise ValueError(
                    f"segment {obj['segment_id']}: RLE decodes to {pixels.shape[0]} px, "
                    f"area says {obj['area']}"
                )
            records.append(
                SegmentRecord(
                    region_id=obj["region_id"],
                    segment_id=obj["segment_id"],
                    pixels=pixels,
                    majority_label=name_to_label[obj["majority_label"]],
                    hor=obj["hor"],
                )
            )
    return records
