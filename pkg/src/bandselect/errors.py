"""Exception hierarchy shared by all pipeline stages."""


class BandSelectError(Exception):
    """Base class for all errors raised by this package."""


class RasterFormatError(BandSelectError):
    """Raster directory or mask file is malformed."""


class MissingBandError(RasterFormatError):
    """A declared band plane file is absent."""

    def __init__(self, band: int, path=None):
        self.band = band
        self.path = path
        msg = f"missing band plane {band}"
        if path is not None:
            msg += f" (expected at {path})"
        super().__init__(msg)


class DimensionMismatchError(BandSelectError):
    """Two rasters/masks/maps that must share a pixel grid do not."""


class NonFiniteDataError(RasterFormatError):
    """Raster data contains NaN or infinity."""


class DegenerateDataError(BandSelectError):
    """Input lacks the variation the operation requires (e.g. rank-deficient PCA)."""


class NoPairsError(BandSelectError):
    """No valid co-occurrence pixel pair exists for the requested direction."""


class UnassignedRegionError(BandSelectError):
    """A segment's region id is not covered by the dataset split."""

    def __init__(self, region_id: int):
        self.region_id = region_id
        super().__init__(f"region {region_id} is not assigned to any split")


class SingleClassError(BandSelectError):
    """A labelled set contains only one class where two are required."""


class ConfigError(BandSelectError):
    """Run configuration failed schema validation."""


class ConfigHashMismatchError(BandSelectError):
    """A stage artifact was produced under a different configuration."""
