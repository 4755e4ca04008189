import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bandselect.errors import DimensionMismatchError
from bandselect.metrics import (
    ConfusionCounts,
    accuracy,
    aggregate_reports,
    confusion,
    confusion_from_labels,
    f1,
    iou,
    metric_report,
    precision,
    recall,
)
from bandselect.raster import LabelMask


def mask(labels):
    return LabelMask(labels=np.asarray(labels, dtype=np.uint8))


class TestConfusion:
    def test_perfect_prediction(self):
        rng = np.random.default_rng(0)
        truth = rng.choice([0, 1], size=(10, 10), p=[0.7, 0.3]).astype(np.uint8)
        while truth.sum() != 30:
            truth = rng.choice([0, 1], size=(10, 10), p=[0.7, 0.3]).astype(np.uint8)
        c = confusion(mask(truth), mask(truth))
        assert (c.tp, c.tn, c.fp, c.fn) == (30, 70, 0, 0)

    def test_complement_prediction(self):
        rng = np.random.default_rng(1)
        truth = rng.integers(0, 2, (8, 8)).astype(np.uint8)
        c = confusion(mask(1 - truth), mask(truth))
        assert c.tp == 0 and c.tn == 0
        assert c.total == 64

    def test_ignore_pixels_excluded(self):
        truth = np.zeros((10, 10), dtype=np.uint8)
        truth.ravel()[:10] = 255
        pred = np.zeros((10, 10), dtype=np.uint8)
        c = confusion(mask(pred), mask(truth))
        assert c.total == 90

    def test_ignore_in_pred_rejected(self):
        pred = np.full((2, 2), 255, dtype=np.uint8)
        with pytest.raises(ValueError):
            confusion(mask(pred), mask(np.zeros((2, 2))))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            confusion(mask(np.zeros((2, 2))), mask(np.zeros((2, 3))))

    def test_counts_sum_to_non_ignored(self):
        rng = np.random.default_rng(2)
        truth = rng.choice([0, 1, 255], size=(20, 20), p=[0.5, 0.3, 0.2]).astype(np.uint8)
        pred = rng.integers(0, 2, (20, 20)).astype(np.uint8)
        c = confusion(mask(pred), mask(truth))
        assert c.total == int((truth != 255).sum())


class TestMetricValues:
    def test_hand_case(self):
        c = ConfusionCounts(tp=3, fp=1, tn=5, fn=1)
        assert precision(c) == pytest.approx(0.75)
        assert recall(c) == pytest.approx(0.75)
        assert f1(c) == pytest.approx(0.75)
        assert accuracy(c) == pytest.approx(0.8)
        assert iou(c) == pytest.approx(0.6)

    def test_perfect(self):
        c = ConfusionCounts(tp=10, tn=20)
        assert precision(c) == recall(c) == f1(c) == accuracy(c) == iou(c) == 1.0

    def test_boundary_semantics(self):
        c = ConfusionCounts(tp=0, fp=0, fn=3, tn=7)
        assert precision(c) is None
        assert recall(c) == 0.0
        assert iou(c) == 0.0
        report = metric_report(c)
        assert report["precision"] is None
        assert report["undefined"] == ["f1", "precision"]

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            ConfusionCounts(tp=-1)

    @given(
        tp=st.integers(min_value=0, max_value=10_000),
        fp=st.integers(min_value=0, max_value=10_000),
        tn=st.integers(min_value=0, max_value=10_000),
        fn=st.integers(min_value=0, max_value=10_000),
    )
    @settings(max_examples=200, deadline=None)
    def test_identities(self, tp, fp, tn, fn):
        c = ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)
        f = f1(c)
        j = iou(c)
        if f is not None and j is not None:
            assert abs(j - f / (2.0 - f)) < 1e-12
            p, r = precision(c), recall(c)
            assert min(p, r) - 1e-12 <= f <= max(p, r) + 1e-12
            assert abs(f - 2 * p * r / (p + r)) < 1e-12
        if c.total:
            swapped = ConfusionCounts(tp=tn, fp=fn, tn=tp, fn=fp)
            assert accuracy(c) == pytest.approx(accuracy(swapped))

    def test_confusion_from_labels(self):
        y = np.array([1, 1, 0, 0, 1])
        p = np.array([1, 0, 0, 1, 1])
        c = confusion_from_labels(y, p)
        assert (c.tp, c.fn, c.tn, c.fp) == (2, 1, 1, 1)


class TestAggregation:
    def test_micro_pools_counts(self):
        per_image = {
            "a.pgm": ConfusionCounts(tp=3, fp=1, tn=5, fn=1),
            "b.pgm": ConfusionCounts(tp=0, fp=0, tn=10, fn=0),
        }
        report = aggregate_reports(per_image)
        micro = report["micro"]
        assert micro["counts"] == {"tp": 3, "fp": 1, "tn": 15, "fn": 1}
        assert micro["accuracy"] == pytest.approx(18 / 20)

    def test_macro_skips_undefined(self):
        per_image = {
            "a.pgm": ConfusionCounts(tp=3, fp=1, tn=5, fn=1),
            "b.pgm": ConfusionCounts(tp=0, fp=0, tn=10, fn=0),
        }
        report = aggregate_reports(per_image)
        macro = report["macro"]
        assert macro["precision"] == pytest.approx(0.75)
        assert macro["precision_defined_images"] == 1
        assert macro["accuracy_defined_images"] == 2
