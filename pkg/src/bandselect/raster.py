"""Multiband raster data model, on-disk formats and derived composites.

A raster lives on disk as a directory holding ``meta.json`` plus one raw
little-endian float32 plane per band (``band_<i>.f32``, row-major). Label
masks are binary PGM (P5, maxval 255) with pixel values 0 = forest,
1 = non-forest, 255 = ignore. Both formats are bit-exact round-trippable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateDataError,
    DimensionMismatchError,
    MissingBandError,
    NonFiniteDataError,
    RasterFormatError,
)

FOREST = 0
NONFOREST = 1
IGNORE = 255

RASTER_DTYPE = "f32le"


@dataclass(frozen=True)
class MultibandRaster:
    """B-band float image, band-major, shape (bands, height, width)."""

    data: np.ndarray
    band_names: tuple[str, ...]

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float32)
        if data.ndim != 3 or data.shape[0] < 1:
            raise RasterFormatError(f"raster data must be (bands, h, w), got {data.shape}")
        if not np.isfinite(data).all():
            raise NonFiniteDataError("raster data contains non-finite values")
        if len(self.band_names) != data.shape[0]:
            raise RasterFormatError(
                f"{len(self.band_names)} band names for {data.shape[0]} bands"
            )
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "band_names", tuple(self.band_names))

    @property
    def bands(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def band(self, i: int) -> np.ndarray:
        return self.data[i]


@dataclass(frozen=True)
class LabelMask:
    """Per-pixel ground truth: 0 forest, 1 non-forest, 255 ignore."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.uint8)
        if labels.ndim != 2:
            raise RasterFormatError(f"mask must be 2-D, got shape {labels.shape}")
        bad = ~np.isin(labels, (FOREST, NONFOREST, IGNORE))
        if bad.any():
            y, x = np.argwhere(bad)[0]
            raise RasterFormatError(
                f"mask value {int(labels[y, x])} at (x={x}, y={y}) not in {{0, 1, 255}}"
            )
        object.__setattr__(self, "labels", labels)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@dataclass(frozen=True)
class BandComposite:
    """A stacked band selection, possibly with derived channels (PC1-PC3, NDVI)."""

    source_bands: tuple[str, ...]
    raster: MultibandRaster

    def __post_init__(self):
        object.__setattr__(self, "source_bands", tuple(self.source_bands))
        if len(self.source_bands) != self.raster.bands:
            raise RasterFormatError("source_bands length must match raster band count")


def save_raster(raster: MultibandRaster, path) -> None:
    """Write ``meta.json`` + one ``band_<i>.f32`` plane per band."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    meta = {
        "width": raster.width,
        "height": raster.height,
        "bands": raster.bands,
        "band_names": list(raster.band_names),
        "dtype": RASTER_DTYPE,
    }
    (root / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    for i in range(raster.bands):
        plane = np.ascontiguousarray(raster.data[i], dtype="<f4")
        (root / f"band_{i}.f32").write_bytes(plane.tobytes())


def load_raster(path) -> MultibandRaster:
    """Read a raster directory written by :func:`save_raster`."""
    root = Path(path)
    meta_path = root / "meta.json"
    if not meta_path.is_file():
        raise RasterFormatError(f"no meta.json under {root}")
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as e:
        raise RasterFormatError(f"unparseable meta.json at {meta_path}: {e}") from e
    for key in ("width", "height", "bands", "band_names", "dtype"):
        if key not in meta:
            raise RasterFormatError(f"meta.json at {meta_path} lacks '{key}'")
    if meta["dtype"] != RASTER_DTYPE:
        raise RasterFormatError(f"unsupported dtype {meta['dtype']!r} (want {RASTER_DTYPE!r})")
    w, h, b = int(meta["width"]), int(meta["height"]), int(meta["bands"])
    planes = []
    for i in range(b):
        plane_path = root / f"band_{i}.f32"
        if not plane_path.is_file():
            raise MissingBandError(i, plane_path)
        raw = plane_path.read_bytes()
        expected = w * h * 4
        if len(raw) != expected:
            raise RasterFormatError(
                f"{plane_path}: {len(raw)} bytes, expected {expected} "
                f"({w}x{h} float32) - mismatch at offset {min(len(raw), expected)}"
            )
        plane = np.frombuffer(raw, dtype="<f4").reshape(h, w)
        if not np.isfinite(plane).all():
            off = int(np.flatnonzero(~np.isfinite(plane.ravel()))[0])
            raise NonFiniteDataError(f"{plane_path}: non-finite value at element {off}")
        planes.append(plane)
    data = np.stack(planes, axis=0)
    return MultibandRaster(data=data, band_names=tuple(meta["band_names"]))


def select_bands(raster: MultibandRaster, idx: list[int]) -> MultibandRaster:
    """Stack the listed bands, in order, into a new raster."""
    for i in idx:
        if not 0 <= i < raster.bands:
            raise IndexError(f"band index {i} out of range [0, {raster.bands})")
    data = raster.data[list(idx)].copy()
    names = tuple(raster.band_names[i] for i in idx)
    return MultibandRaster(data=data, band_names=names)


def band_pca(raster: MultibandRaster) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Eigendecompose the pixelwise band covariance.

    Returns (components, eigenvalues, mean): columns of ``components`` are unit
    eigenvectors sorted by descending eigenvalue, each sign-normalised so its
    largest-magnitude loading is positive.
    """
    b = raster.bands
    x = raster.data.reshape(b, -1).astype(np.float64)
    mean = x.mean(axis=1)
    centered = x - mean[:, None]
    cov = (centered @ centered.T) / x.shape[1]
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    for j in range(b):
        v = eigvecs[:, j]
        mags = np.abs(v)
        # first loading within rounding of the max, so exact-magnitude ties
        # break deterministically
        lead = int(np.flatnonzero(mags >= mags.max() * (1.0 - 1e-12))[0])
        if v[lead] < 0:
            eigvecs[:, j] = -v
    return eigvecs, eigvals, mean


def pca_composite(raster: MultibandRaster, n: int, rescale: bool = True) -> MultibandRaster:
    """Project onto the top-n principal components of the band covariance.

    Output bands are named PC1..PCn. With ``rescale`` each band is min-max
    scaled to [0, 1]; without, raw centered projections are returned.
    """
    if not 1 <= n <= raster.bands:
        raise ValueError(f"n={n} outside [1, {raster.bands}]")
    eigvecs, eigvals, mean = band_pca(raster)
    top = float(eigvals[0])
    if top <= 0.0:
        raise DegenerateDataError("all pixel vectors identical; covariance is zero")
    rank = int(np.sum(eigvals > top * 1e-12))
    if n > rank:
        raise DegenerateDataError(f"requested {n} components but covariance rank is {rank}")
    x = raster.data.reshape(raster.bands, -1).astype(np.float64)
    proj = eigvecs[:, :n].T @ (x - mean[:, None])
    if rescale:
        lo = proj.min(axis=1, keepdims=True)
        hi = proj.max(axis=1, keepdims=True)
        proj = (proj - lo) / (hi - lo)
    data = proj.reshape(n, raster.height, raster.width).astype(np.float32)
    names = tuple(f"PC{j + 1}" for j in range(n))
    return MultibandRaster(data=data, band_names=names)


def ndvi(raster: MultibandRaster, nir: int, red: int) -> MultibandRaster:
    """Per-pixel (NIR - RED)/(NIR + RED); 0/0 pixels map to 0."""
    if nir == red:
        raise ValueError("nir and red must be distinct bands")
    for i in (nir, red):
        if not 0 <= i < raster.bands:
            raise IndexError(f"band index {i} out of range [0, {raster.bands})")
    a = raster.data[nir].astype(np.float64)
    b = raster.data[red].astype(np.float64)
    denom = a + b
    out = np.zeros_like(a)
    nz = denom != 0
    out[nz] = (a[nz] - b[nz]) / denom[nz]
    return MultibandRaster(data=out[None].astype(np.float32), band_names=("NDVI",))


def minmax_rescale(plane: np.ndarray) -> np.ndarray:
    """Min-max rescale a 2-D plane to [0, 1]; constant planes map to 0."""
    lo = float(plane.min())
    hi = float(plane.max())
    if hi == lo:
        return np.zeros_like(plane, dtype=np.float32)
    return ((plane - lo) / (hi - lo)).astype(np.float32)


def all_plus_ndvi(raster: MultibandRaster, nir: int, red: int) -> BandComposite:
    """All input bands plus NDVI rescaled to [0, 1] appended as a final channel."""
    nd = minmax_rescale(ndvi(raster, nir, red).data[0])
    data = np.concatenate([raster.data, nd[None]], axis=0)
    names = raster.band_names + ("NDVI",)
    return BandComposite(source_bands=names, raster=MultibandRaster(data=data, band_names=names))


def save_mask(mask: LabelMask, path) -> None:
    """Write a binary PGM (P5, maxval 255)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    path.write_bytes(header + mask.labels.tobytes())


def load_mask(path) -> LabelMask:
    """Read a binary PGM (P5, maxval 255) written by :func:`save_mask`."""
    raw = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while pos < len(raw) and raw[pos] in b" \t\r\n":
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos] not in b"\r\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and raw[pos] not in b" \t\r\n":
            pos += 1
        if start == pos:
            raise RasterFormatError(f"{path}: truncated PGM header")
        fields.append(raw[start:pos])
    if fields[0] != b"P5":
        raise RasterFormatError(f"{path}: not a binary PGM (magic {fields[0]!r})")
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if maxval != 255:
        raise RasterFormatError(f"{path}: maxval {maxval}, expected 255")
    pos += 1  # single whitespace byte after maxval
    pixels = raw[pos : pos + w * h]
    if len(pixels) != w * h:
        raise RasterFormatError(f"{path}: {len(pixels)} pixel bytes, expected {w * h}")
    labels = np.frombuffer(pixels, dtype=np.uint8).reshape(h, w)
    return LabelMask(labels=labels)


def save_pgm(plane: np.ndarray, path) -> None:
    """Export a float plane as an 8-bit PGM for visual inspection."""
    scaled = np.round(minmax_rescale(np.asarray(plane, dtype=np.float64)) * 255.0)
    img = scaled.astype(np.uint8)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(header + img.tobytes())


def check_dimensions(a, b, what: str = "inputs") -> None:
    if (a.width, a.height) != (b.width, b.height):
        raise DimensionMismatchError(
            f"{what}: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
