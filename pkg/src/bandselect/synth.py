"""Synthetic multiband corpus generator for desk-scale verification.

Each region gets a forest background with elliptical non-forest blobs. On the
configured signal bands, non-forest areas mix rough (pixel-uncorrelated)
texture into the smooth forest texture; the blend weight is drawn per blob
and per band, and each signal band additionally owns one small exclusive
blob per region that only it can see, so every signal band carries real and
partly unique class evidence. A constant mean shift separates the classes
for the segmentation composite but cancels under per-segment quantization.
The remaining bands get identical texture statistics in both classes, so
only the signal bands are informative. Identical seeds produce byte-identical
corpora.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ConfigError
from .raster import LabelMask, MultibandRaster, save_mask, save_raster

BAND_NAMES = tuple(f"B{i}" for i in range(1, 8))


@dataclass(frozen=True)
class SyntheticSpec:
    width: int = 256
    height: int = 256
    regions: int = 4
    signal_bands: tuple[str, ...] = ("B1", "B3", "B4")
    contrast_level: float = 40.0
    blob_count: int = 12
    blob_radius: tuple[float, float] = (14.0, 34.0)
    seed: int = 7

    def __post_init__(self):
        if self.width < 64 or self.height < 64:
            raise ConfigError("synthetic regions must be at least 64x64")
        if self.regions < 1:
            raise ConfigError("need at least one region")
        bad = set(self.signal_bands) - set(BAND_NAMES)
        if bad:
            raise ConfigError(f"unknown signal bands {sorted(bad)}")
        if not self.signal_bands:
            raise ConfigError("signal_bands must be nonempty")
        if self.blob_count < 0:
            raise ConfigError("blob_count must be >= 0")
        if self.blob_radius[0] <= 0 or self.blob_radius[1] < self.blob_radius[0]:
            raise ConfigError("blob_radius must be 0 < min <= max")
        object.__setattr__(self, "signal_bands", tuple(self.signal_bands))
        object.__setattr__(self, "blob_radius", tuple(float(r) for r in self.blob_radius))

    def to_json(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "regions": self.regions,
            "signal_bands": list(self.signal_bands),
            "contrast_level": self.contrast_level,
            "blob_count": self.blob_count,
            "blob_radius": list(self.blob_radius),
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SyntheticSpec":
        known = {
            "width",
            "height",
            "regions",
            "signal_bands",
            "contrast_level",
            "blob_count",
            "blob_radius",
            "seed",
        }
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown synthetic keys {sorted(unknown)}")
        kwargs = dict(obj)
        if "signal_bands" in kwargs:
            kwargs["signal_bands"] = tuple(kwargs["signal_bands"])
        if "blob_radius" in kwargs:
            kwargs["blob_radius"] = tuple(kwargs["blob_radius"])
        return cls(**kwargs)


def _smooth_noise(rng: np.random.Generator, shape: tuple[int, int], sigma: float) -> np.ndarray:
    """Correlated unit-variance noise field."""
    field = ndimage.gaussian_filter(rng.standard_normal(shape), sigma, mode="reflect")
    return field / field.std()


def _blobs(rng: np.random.Generator, spec: SyntheticSpec, n_exclusive: int) -> list[np.ndarray]:
    """Random rotated ellipses; True marks non-forest.

    The first ``n_exclusive`` blobs use the lower part of the radius range
    (they carry single-band evidence and should not dominate the class area).
    """
    h, w = spec.height, spec.width
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    rmin, rmax = spec.blob_radius
    blobs = []
    for j in range(spec.blob_count):
        hi = rmin + 0.4 * (rmax - rmin) if j < n_exclusive else rmax
        cx = rng.uniform(0.1 * w, 0.9 * w)
        cy = rng.uniform(0.1 * h, 0.9 * h)
        a = rng.uniform(rmin, hi)
        b = rng.uniform(rmin, hi)
        theta = rng.uniform(0, np.pi)
        dx = xs - cx
        dy = ys - cy
        u = dx * np.cos(theta) + dy * np.sin(theta)
        v = -dx * np.sin(theta) + dy * np.cos(theta)
        blobs.append((u / a) ** 2 + (v / b) ** 2 <= 1.0)
    return blobs


# Forest keeps a mild rough component everywhere; shared blobs draw their
# extra roughness per blob and per signal band, so class evidence is graded
# and band measurements disagree. Exclusive blobs are visible in one band.
FOREST_ROUGHNESS = 0.30
SHARED_ROUGHNESS_RANGE = (0.55, 0.90)
EXCLUSIVE_ROUGHNESS_RANGE = (0.80, 0.95)


def generate_region(spec: SyntheticSpec, region_seed: np.random.SeedSequence) -> tuple[
    MultibandRaster, LabelMask
]:
    """One region: 7-band raster plus its forest/non-forest mask."""
    streams = region_seed.spawn(3 + len(BAND_NAMES))
    mask_rng = np.random.default_rng(streams[0])
    bg_rng = np.random.default_rng(streams[1])
    blend_rng = np.random.default_rng(streams[2])
    h, w = spec.height, spec.width

    n_exclusive = min(len(spec.signal_bands), max(0, spec.blob_count - 2))
    blobs = _blobs(mask_rng, spec, n_exclusive)
    blob = np.zeros((h, w), dtype=bool)
    for b in blobs:
        blob |= b
    mask = LabelMask(labels=blob.astype(np.uint8))

    # blob j < n_exclusive belongs to signal band j alone; the rest are shared
    gamma: dict[str, np.ndarray] = {}
    for bi, name in enumerate(spec.signal_bands):
        values = blend_rng.uniform(*SHARED_ROUGHNESS_RANGE, size=len(blobs))
        for j in range(n_exclusive):
            if j == bi:
                values[j] = blend_rng.uniform(*EXCLUSIVE_ROUGHNESS_RANGE)
            else:
                values[j] = FOREST_ROUGHNESS
        gamma[name] = values

    background = 0.05 * _smooth_noise(bg_rng, (h, w), sigma=24.0)
    texture_amp = 0.20
    shift = 0.40
    planes = []
    for i, name in enumerate(BAND_NAMES):
        rng = np.random.default_rng(streams[3 + i])
        base = 0.30 + 0.04 * i
        smooth = _smooth_noise(rng, (h, w), sigma=2.0)
        rough = rng.standard_normal((h, w))
        blend = np.full((h, w), FOREST_ROUGHNESS)
        if name in spec.signal_bands:
            # shared blobs first; exclusive overlays win where blobs overlap
            for j in range(n_exclusive, len(blobs)):
                blend[blobs[j]] = gamma[name][j]
            for j in range(n_exclusive):
                blend[blobs[j]] = gamma[name][j]
        texture = (1.0 - blend) * smooth + blend * rough
        plane = base + background + texture_amp * texture
        if name in spec.signal_bands:
            plane = plane + shift * blob
        planes.append(plane)
    data = np.stack(planes).astype(np.float32)
    return MultibandRaster(data=data, band_names=BAND_NAMES), mask


def generate_corpus(spec: SyntheticSpec, root) -> dict:
    """Write all regions plus a corpus.json echoing the generating spec."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    seq = np.random.SeedSequence(spec.seed)
    region_seeds = seq.spawn(spec.regions)
    regions = []
    for r in range(spec.regions):
        region_id = r + 1
        raster, mask = generate_region(spec, region_seeds[r])
        region_dir = root / f"region_{region_id}"
        save_raster(raster, region_dir / "raster")
        save_mask(mask, region_dir / "mask.pgm")
        nonforest = int((mask.labels == 1).sum())
        regions.append(
            {
                "id": region_id,
                "raster": f"region_{region_id}/raster",
                "mask": f"region_{region_id}/mask.pgm",
                "width": spec.width,
                "height": spec.height,
                "nonforest_pixels": nonforest,
            }
        )
    manifest = {"spec": spec.to_json(), "regions": regions}
    (root / "corpus.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return manifest


def load_corpus_manifest(root) -> dict:
    path = Path(root) / "corpus.json"
    if not path.is_file():
        raise ConfigError(f"no corpus.json under {root}")
    return json.loads(path.read_text())
