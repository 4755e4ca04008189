import json

import numpy as np
import pytest

from bandselect.errors import (
    DegenerateDataError,
    MissingBandError,
    NonFiniteDataError,
    RasterFormatError,
)
from bandselect.raster import (
    LabelMask,
    MultibandRaster,
    all_plus_ndvi,
    band_pca,
    load_mask,
    load_raster,
    minmax_rescale,
    ndvi,
    pca_composite,
    save_mask,
    save_pgm,
    save_raster,
    select_bands,
)


def make_raster(data, names=None):
    data = np.asarray(data, dtype=np.float32)
    if names is None:
        names = tuple(f"B{i + 1}" for i in range(data.shape[0]))
    return MultibandRaster(data=data, band_names=names)


def random_raster(rng, bands=7, h=16, w=16):
    return make_raster(rng.random((bands, h, w)))


class TestRasterIO:
    def test_known_bytes_round_trip(self, tmp_path):
        r = make_raster(np.array([[[0.0, 1.0], [2.0, 3.0]]]))
        save_raster(r, tmp_path / "r")
        loaded = load_raster(tmp_path / "r")
        assert loaded.data.ravel()[3] == 3.0
        assert loaded.width == 2 and loaded.height == 2 and loaded.bands == 1

    def test_round_trip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(1)
        r = random_raster(rng)
        save_raster(r, tmp_path / "r")
        loaded = load_raster(tmp_path / "r")
        assert np.array_equal(loaded.data, r.data)
        assert loaded.band_names == r.band_names

    def test_missing_band_rejected(self, tmp_path):
        rng = np.random.default_rng(2)
        save_raster(random_raster(rng), tmp_path / "r")
        (tmp_path / "r" / "band_6.f32").unlink()
        with pytest.raises(MissingBandError) as exc:
            load_raster(tmp_path / "r")
        assert exc.value.band == 6

    def test_declared_but_absent_band(self, tmp_path):
        rng = np.random.default_rng(3)
        save_raster(random_raster(rng, bands=6), tmp_path / "r")
        meta = json.loads((tmp_path / "r" / "meta.json").read_text())
        meta["bands"] = 7
        meta["band_names"].append("B7")
        (tmp_path / "r" / "meta.json").write_text(json.dumps(meta))
        with pytest.raises(MissingBandError) as exc:
            load_raster(tmp_path / "r")
        assert exc.value.band == 6

    def test_truncated_plane_reports_offset(self, tmp_path):
        rng = np.random.default_rng(4)
        save_raster(random_raster(rng, bands=1), tmp_path / "r")
        plane = tmp_path / "r" / "band_0.f32"
        plane.write_bytes(plane.read_bytes()[:-4])
        with pytest.raises(RasterFormatError, match="offset"):
            load_raster(tmp_path / "r")

    def test_non_finite_rejected(self, tmp_path):
        r = make_raster(np.ones((1, 2, 2)))
        save_raster(r, tmp_path / "r")
        bad = np.array([1.0, np.inf, 1.0, 1.0], dtype="<f4")
        (tmp_path / "r" / "band_0.f32").write_bytes(bad.tobytes())
        with pytest.raises(NonFiniteDataError, match="element 1"):
            load_raster(tmp_path / "r")

    def test_constructor_rejects_nan(self):
        with pytest.raises(NonFiniteDataError):
            make_raster(np.array([[[np.nan]]]))


class TestSelectBands:
    def test_reorder_names(self):
        rng = np.random.default_rng(5)
        r = random_raster(rng)
        sel = select_bands(r, [3, 2, 0])
        assert sel.band_names == ("B4", "B3", "B1")
        assert np.array_equal(sel.data[0], r.data[3])

    def test_identity(self):
        rng = np.random.default_rng(6)
        r = random_raster(rng)
        sel = select_bands(r, list(range(7)))
        assert np.array_equal(sel.data, r.data)
        assert sel.band_names == r.band_names

    def test_out_of_range(self):
        rng = np.random.default_rng(7)
        with pytest.raises(IndexError):
            select_bands(random_raster(rng), [7])

    def test_commutes_with_save_load(self, tmp_path):
        rng = np.random.default_rng(8)
        r = random_raster(rng)
        save_raster(select_bands(r, [1, 4]), tmp_path / "a")
        via_disk = load_raster(tmp_path / "a")
        save_raster(r, tmp_path / "b")
        other = select_bands(load_raster(tmp_path / "b"), [1, 4])
        assert np.array_equal(via_disk.data, other.data)


class TestPca:
    def test_rank_one_raster(self):
        rng = np.random.default_rng(9)
        base = rng.random((16, 16)).astype(np.float32)
        r = make_raster(np.stack([base] * 7))
        pc1 = pca_composite(r, 1)
        assert pc1.bands == 1
        with pytest.raises(DegenerateDataError):
            pca_composite(r, 2)

    def test_all_identical_pixels_rejected(self):
        r = make_raster(np.ones((3, 8, 8)))
        with pytest.raises(DegenerateDataError):
            pca_composite(r, 1)

    def test_anticorrelated_direction(self):
        rng = np.random.default_rng(10)
        v = rng.random((8, 8)).astype(np.float32)
        r = make_raster(np.stack([v, -v + 1.0]), names=("B1", "B2"))
        vecs, vals, _ = band_pca(r)
        top = vecs[:, 0]
        # direction collinear with (1, -1)/sqrt(2); sign fixed by the
        # largest-loading-positive rule (float32 storage perturbs slightly)
        assert np.allclose(np.abs(top), 1.0 / np.sqrt(2.0), atol=1e-5)
        assert top[0] * top[1] < 0
        assert top[int(np.argmax(np.abs(top)))] > 0

    def test_reconstruction_identity(self):
        # Oracle: projecting onto all components and inverting recovers the input.
        rng = np.random.default_rng(11)
        r = random_raster(rng, bands=7, h=32, w=32)
        vecs, vals, mean = band_pca(r)
        proj = pca_composite(r, 7, rescale=False)
        x = proj.data.reshape(7, -1).astype(np.float64)
        recon = vecs @ x + mean[:, None]
        orig = r.data.reshape(7, -1).astype(np.float64)
        rel = np.abs(recon - orig).max() / np.abs(orig).max()
        assert rel < 1e-6

    def test_variances_non_increasing(self):
        rng = np.random.default_rng(12)
        r = random_raster(rng, bands=5, h=24, w=24)
        proj = pca_composite(r, 5, rescale=False)
        variances = proj.data.reshape(5, -1).var(axis=1)
        assert np.all(np.diff(variances) <= 1e-9)

    def test_output_rescaled_to_unit_interval(self):
        rng = np.random.default_rng(13)
        r = random_raster(rng)
        comp = pca_composite(r, 3)
        assert comp.band_names == ("PC1", "PC2", "PC3")
        assert comp.data.min() >= 0.0 and comp.data.max() <= 1.0


class TestNdvi:
    def test_arithmetic(self):
        data = np.zeros((7, 1, 1), dtype=np.float32)
        data[4] = 0.8
        data[3] = 0.2
        r = make_raster(data)
        out = ndvi(r, nir=4, red=3)
        assert out.data[0, 0, 0] == pytest.approx(0.6)

    def test_equal_bands_zero(self):
        rng = np.random.default_rng(14)
        v = rng.random((4, 4)).astype(np.float32)
        r = make_raster(np.stack([v, v]), names=("B4", "B5"))
        out = ndvi(r, nir=1, red=0)
        assert np.all(out.data == 0.0)

    def test_zero_sum_guarded(self):
        r = make_raster(np.zeros((2, 2, 2)), names=("B4", "B5"))
        out = ndvi(r, nir=1, red=0)
        assert np.all(out.data == 0.0)

    def test_bounded_for_nonnegative_inputs(self):
        rng = np.random.default_rng(15)
        r = random_raster(rng, bands=7)
        out = ndvi(r, nir=4, red=3)
        assert out.data.min() >= -1.0 and out.data.max() <= 1.0

    def test_same_band_rejected(self):
        rng = np.random.default_rng(16)
        with pytest.raises(ValueError):
            ndvi(random_raster(rng), nir=3, red=3)

    def test_all_plus_ndvi_channel(self):
        rng = np.random.default_rng(17)
        r = random_raster(rng)
        comp = all_plus_ndvi(r, nir=4, red=3)
        assert comp.raster.bands == 8
        assert comp.source_bands[-1] == "NDVI"
        nd_chan = comp.raster.data[7]
        assert nd_chan.min() >= 0.0 and nd_chan.max() <= 1.0
        expected = minmax_rescale(ndvi(r, 4, 3).data[0])
        assert np.array_equal(nd_chan, expected)


class TestMasks:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(18)
        labels = rng.choice([0, 1, 255], size=(9, 7)).astype(np.uint8)
        save_mask(LabelMask(labels=labels), tmp_path / "m.pgm")
        loaded = load_mask(tmp_path / "m.pgm")
        assert np.array_equal(loaded.labels, labels)

    def test_rejects_other_values(self):
        with pytest.raises(RasterFormatError):
            LabelMask(labels=np.array([[0, 3]], dtype=np.uint8))

    def test_pgm_export_readable(self, tmp_path):
        rng = np.random.default_rng(19)
        save_pgm(rng.random((5, 6)), tmp_path / "vis.pgm")
        raw = (tmp_path / "vis.pgm").read_bytes()
        assert raw.startswith(b"P5\n6 5\n255\n")
        assert len(raw) == len(b"P5\n6 5\n255\n") + 30
