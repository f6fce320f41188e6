from typing import Optional


class PalaeoError(Exception):
    pass


class ConfigError(PalaeoError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


# RASTER

class RasterError(PalaeoError):
    pass


class CrsMismatch(RasterError):
    def __init__(self, expected: int, actual: int):
        super().__init__(f"CRS mismatch: EPSG:{expected} vs EPSG:{actual}")
        self.expected = expected
        self.actual = actual


class DisjointRoi(RasterError):
    pass


class GridMismatch(RasterError):
    pass


# GEOTIFF

class TiffError(PalaeoError):
    pass


class UnsupportedFeature(TiffError):
    def __init__(self, tag: str, value):
        super().__init__(f"Unsupported TIFF feature: {tag}={value}")
        self.tag = tag
        self.value = value


class MalformedFile(TiffError):
    pass


# CATALOG

class CatalogError(PalaeoError):
    pass


class MalformedSidecar(CatalogError):
    def __init__(self, path: str, field: str, message: str = "invalid value"):
        super().__init__(f"{path}: field '{field}': {message}")
        self.path = path
        self.field = field


class HttpError(CatalogError):
    def __init__(self, status: Optional[int], excerpt: str):
        statusText = status if status is not None else "no response"
        super().__init__(f"HTTP {statusText}: {excerpt[:200]}")
        self.status = status
        self.excerpt = excerpt[:200]


class MalformedResponse(CatalogError):
    pass


# COMPOSITING

class CompositeError(PalaeoError):
    pass


class EmptyInput(CompositeError):
    pass


class EmptyBucket(CompositeError):
    def __init__(self, window: str, period: str):
        super().__init__(f"No scenes in bucket {window}/{period}")
        self.window = window
        self.period = period


class MissingBand(CompositeError):
    def __init__(self, sceneId: str, band: str):
        super().__init__(f"{sceneId} does not provide band {band}")
        self.sceneId = sceneId
        self.band = band


# SPECTRAL

class SpectralError(PalaeoError):
    pass


class OutOfRange(SpectralError):
    pass


class DegenerateBand(SpectralError):
    def __init__(self, band: str):
        super().__init__(f"Band {band} has zero variance")
        self.band = band


class InsufficientData(SpectralError):
    pass


class ConvergenceError(SpectralError):
    pass


class EmptyBand(PalaeoError):
    pass


class OutputLocked(PalaeoError):
    pass
