"""Confusion-count metrics for binary classification and binary masks.

Non-forest (deforestation) is the positive class. Metrics with a zero
denominator are reported as undefined (None) rather than coerced to 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError
from .raster import IGNORE, LabelMask


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            tn=self.tn + other.tn,
            fn=self.fn + other.fn,
        )


def confusion(pred: LabelMask, truth: LabelMask) -> ConfusionCounts:
    """Pixelwise counts over pixels the truth does not mark ignore."""
    if (pred.width, pred.height) != (truth.width, truth.height):
        raise DimensionMismatchError(
            f"pred {pred.width}x{pred.height} vs truth {truth.width}x{truth.height}"
        )
    if (pred.labels == IGNORE).any():
        raise ValueError("prediction mask may not contain ignore pixels")
    keep = truth.labels != IGNORE
    p = pred.labels[keep] == 1
    t = truth.labels[keep] == 1
    return ConfusionCounts(
        tp=int((p & t).sum()),
        fp=int((p & ~t).sum()),
        tn=int((~p & ~t).sum()),
        fn=int((~p & t).sum()),
    )


def confusion_from_labels(y_true: np.ndarray, y_pred: np.ndarray) -> ConfusionCounts:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise DimensionMismatchError("label vectors differ in length")
    p = y_pred == 1
    t = y_true == 1
    return ConfusionCounts(
        tp=int((p & t).sum()),
        fp=int((p & ~t).sum()),
        tn=int((~p & ~t).sum()),
        fn=int((~p & t).sum()),
    )


def precision(c: ConfusionCounts) -> float | None:
    denom = c.tp + c.fp
    return c.tp / denom if denom else None


def recall(c: ConfusionCounts) -> float | None:
    denom = c.tp + c.fn
    return c.tp / denom if denom else None


def f1(c: ConfusionCounts) -> float | None:
    p = precision(c)
    r = recall(c)
    if p is None or r is None or p + r == 0:
        return None
    return 2.0 * p * r / (p + r)


def accuracy(c: ConfusionCounts) -> float | None:
    return (c.tp + c.tn) / c.total if c.total else None


def iou(c: ConfusionCounts) -> float | None:
    denom = c.tp + c.fp + c.fn
    return c.tp / denom if denom else None


METRIC_FUNCS = {
    "precision": precision,
    "recall": recall,
    "f1": f1,
    "accuracy": accuracy,
    "iou": iou,
}


def metric_report(c: ConfusionCounts) -> dict:
    """All five metrics with explicit undefined markers."""
    out: dict = {"counts": {"tp": c.tp, "fp": c.fp, "tn": c.tn, "fn": c.fn}}
    undefined = []
    for name, func in METRIC_FUNCS.items():
        value = func(c)
        out[name] = value
        if value is None:
            undefined.append(name)
    out["undefined"] = sorted(undefined)
    return out


def aggregate_reports(per_image: dict[str, ConfusionCounts]) -> dict:
    """Per-image metrics plus micro (pooled counts) and macro (mean) rollups."""
    report: dict = {"per_image": {}, "micro": None, "macro": None}
    pooled = ConfusionCounts()
    sums: dict[str, list[float]] = {name: [] for name in METRIC_FUNCS}
    for name in sorted(per_image):
        c = per_image[name]
        report["per_image"][name] = metric_report(c)
        pooled = pooled + c
        for metric, func in METRIC_FUNCS.items():
            value = func(c)
            if value is not None:
                sums[metric].append(value)
    report["micro"] = metric_report(pooled)
    macro: dict = {}
    for metric, values in sums.items():
        macro[metric] = float(np.mean(values)) if values else None
        macro[f"{metric}_defined_images"] = len(values)
    report["macro"] = macro
    return report
