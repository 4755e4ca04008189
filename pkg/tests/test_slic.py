import numpy as np
import pytest

from bandselect.errors import RasterFormatError
from bandselect.raster import MultibandRaster
from bandselect.slic import (
    SlicConfig,
    SuperpixelMap,
    default_k,
    enforce_connectivity,
    load_superpixels,
    save_superpixels,
    slic_segment,
    to_lab,
)
from reference_impls import audit_connectivity, boundary_recall, srgb_to_lab_reference


def rgb_raster(data):
    return MultibandRaster(data=np.asarray(data, dtype=np.float32), band_names=("R", "G", "B"))


def uniform_raster(value, h, w):
    return rgb_raster(np.full((3, h, w), value))


class TestToLab:
    def test_black(self):
        lab = to_lab(uniform_raster(0.0, 2, 2))
        assert np.allclose(lab.data, 0.0, atol=1e-6)

    def test_white_point(self):
        lab = to_lab(uniform_raster(1.0, 2, 2))
        assert abs(lab.data[0, 0, 0] - 100.0) < 1e-3
        assert abs(lab.data[1, 0, 0]) < 1e-3
        assert abs(lab.data[2, 0, 0]) < 1e-3

    def test_matches_reference_formula(self):
        r, g, b = 0.5, 0.2, 0.7
        data = np.zeros((3, 1, 1), dtype=np.float32)
        data[0], data[1], data[2] = r, g, b
        lab = to_lab(rgb_raster(data))
        # reference evaluated at the float32-rounded inputs the library sees
        expected = srgb_to_lab_reference(
            float(np.float32(r)), float(np.float32(g)), float(np.float32(b))
        )
        for i in range(3):
            assert abs(float(lab.data[i, 0, 0]) - expected[i]) < 1e-4

    def test_random_pixels_match_reference(self):
        rng = np.random.default_rng(0)
        data = rng.random((3, 4, 5)).astype(np.float32)
        lab = to_lab(rgb_raster(data))
        for y in range(4):
            for x in range(5):
                expected = srgb_to_lab_reference(
                    float(data[0, y, x]), float(data[1, y, x]), float(data[2, y, x])
                )
                for i in range(3):
                    assert abs(float(lab.data[i, y, x]) - expected[i]) < 1e-4

    def test_wrong_band_count(self):
        bad = MultibandRaster(data=np.zeros((2, 2, 2), dtype=np.float32), band_names=("a", "b"))
        with pytest.raises(RasterFormatError):
            to_lab(bad)


class TestSlicSegment:
    def test_uniform_image_grid_partition(self):
        lab = to_lab(uniform_raster(0.5, 64, 64))
        spmap = slic_segment(lab, SlicConfig(k=4), seed=0)
        assert spmap.n_segments == 4
        areas = np.bincount(spmap.labels.ravel())
        n = 64 * 64
        # rectangular-ish quarters: allow one grid row/column of slack
        assert np.all(np.abs(areas - n / 4) <= 64)

    def test_k_equals_one(self):
        lab = to_lab(uniform_raster(0.3, 32, 48))
        spmap = slic_segment(lab, SlicConfig(k=1), seed=0)
        assert spmap.n_segments == 1
        assert np.all(spmap.labels == 0)

    def test_two_tone_boundary_recall(self):
        data = np.zeros((3, 64, 64), dtype=np.float32)
        data[:, :, :32] = 0.2
        data[:, :, 32:] = 0.8
        spmap = slic_segment(to_lab(rgb_raster(data)), SlicConfig(k=16, m=10.0), seed=0)
        assert boundary_recall(spmap.labels, true_edge_x=32, tolerance=1) >= 0.9
        # no segment straddles the tone boundary beyond 1 px
        left = spmap.labels[:, :31]
        right = spmap.labels[:, 33:]
        assert not set(np.unique(left)) & set(np.unique(right))

    def test_determinism(self):
        rng = np.random.default_rng(1)
        data = rng.random((3, 48, 48)).astype(np.float32)
        lab = to_lab(rgb_raster(data))
        a = slic_segment(lab, SlicConfig(k=9), seed=5)
        b = slic_segment(lab, SlicConfig(k=9), seed=5)
        assert np.array_equal(a.labels, b.labels)
        assert a.n_segments == b.n_segments

    def test_pixel_conservation_and_connectivity(self):
        rng = np.random.default_rng(2)
        data = rng.random((3, 40, 40)).astype(np.float32)
        spmap = slic_segment(to_lab(rgb_raster(data)), SlicConfig(k=8), seed=0)
        areas = np.bincount(spmap.labels.ravel(), minlength=spmap.n_segments)
        assert areas.sum() == 40 * 40
        assert np.all(areas > 0)
        assert audit_connectivity(spmap.labels)

    def test_k_larger_than_pixels_rejected(self):
        lab = to_lab(uniform_raster(0.5, 4, 4))
        with pytest.raises(ValueError):
            slic_segment(lab, SlicConfig(k=17), seed=0)

    def test_default_k_rule(self):
        assert default_k(256, 256) == round(256 * 256 / 350)
        assert default_k(10, 10, px_per_segment=350) == 1


class TestEnforceConnectivity:
    def test_already_connected_fixpoint(self):
        labels = np.zeros((10, 10), dtype=np.int32)
        labels[:, 5:] = 1
        spmap = SuperpixelMap(labels=labels, n_segments=2)
        out = enforce_connectivity(spmap, SlicConfig(k=2))
        assert out.n_segments == 2
        # unchanged up to renumbering: partition must be identical
        assert np.array_equal(out.labels == out.labels[0, 0], labels == labels[0, 0])

    def test_single_orphan_absorbed(self):
        labels = np.zeros((9, 9), dtype=np.int32)
        labels[4, 4] = 1
        spmap = SuperpixelMap(labels=labels, n_segments=2)
        out = enforce_connectivity(spmap, SlicConfig(k=2))
        assert out.n_segments == 1
        assert np.all(out.labels == 0)

    def test_random_noise_map_connectivity(self):
        rng = np.random.default_rng(3)
        labels = rng.integers(0, 4, (24, 24)).astype(np.int32)
        spmap = SuperpixelMap(labels=labels, n_segments=4)
        out = enforce_connectivity(spmap, SlicConfig(k=4))
        assert audit_connectivity(out.labels)
        areas = np.bincount(out.labels.ravel(), minlength=out.n_segments)
        assert areas.sum() == 24 * 24
        assert np.all(areas > 0)

    def test_split_label_becomes_two_segments(self):
        # one label in two big pieces: both survive as separate segments
        labels = np.zeros((8, 12), dtype=np.int32)
        labels[:, 4:8] = 1
        labels[:, 8:] = 0
        spmap = SuperpixelMap(labels=labels, n_segments=2)
        out = enforce_connectivity(spmap, SlicConfig(k=3, min_region_frac=0.5))
        assert out.n_segments == 3
        assert audit_connectivity(out.labels)

    def test_merges_into_largest_neighbor(self):
        labels = np.zeros((6, 10), dtype=np.int32)
        labels[:, 6:] = 1  # area 24
        labels[2:4, 4:6] = 2  # small block, touches label 0 (larger) and 1
        spmap = SuperpixelMap(labels=labels, n_segments=3)
        out = enforce_connectivity(spmap, SlicConfig(k=2, min_region_frac=0.5))
        # the small block joins label 0's component (area 32 > 24)
        assert out.labels[2, 4] == out.labels[0, 0]


class TestPersistence:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(4)
        data = rng.random((3, 20, 20)).astype(np.float32)
        spmap = slic_segment(to_lab(rgb_raster(data)), SlicConfig(k=4), seed=0)
        save_superpixels(spmap, tmp_path / "sp")
        loaded = load_superpixels(tmp_path / "sp")
        assert np.array_equal(loaded.labels, spmap.labels)
        assert loaded.n_segments == spmap.n_segments

    def test_file_format(self, tmp_path):
        labels = np.arange(6, dtype=np.int32).reshape(2, 3)
        save_superpixels(SuperpixelMap(labels=labels, n_segments=6), tmp_path / "sp")
        raw = (tmp_path / "sp" / "labels.u32").read_bytes()
        assert raw == labels.astype("<u4").tobytes()
