from typing import Iterable, List, Optional, Sequence

import numpy as np

from models.bands import BandDescriptor, describeBand
from models.errors import GridMismatch, MissingBand
from models.geo import GeoTransform, RegionOfInterest


class RasterGrid:
    """
    Georeferenced multi-band plane of float64 samples sharing one validity mask.

    planes has shape (bands, height, width); mask has shape (height, width) and is True
    where a pixel is valid. Invalid samples are stored as 0.0 and the arrays are read-only,
    so a grid can be handed to parallel workers without copying.
    """

    def __init__(self, planes: np.ndarray, mask: Optional[np.ndarray], geo: GeoTransform,
                 bands: Sequence[BandDescriptor]):
        planes = np.asarray(planes, dtype = np.float64)
        if planes.ndim == 2:
            planes = planes[np.newaxis, :, :]
        if planes.ndim != 3:
            raise GridMismatch(f"planes must be 3-D (bands, rows, cols), got shape {planes.shape}")

        nBands, height, width = planes.shape
        if height < 1 or width < 1:
            raise GridMismatch("grid must be at least 1x1")
        if len(bands) != nBands:
            raise GridMismatch(f"{len(bands)} band descriptors for {nBands} planes")

        if mask is None:
            mask = np.ones((height, width), dtype = bool)
        mask = np.asarray(mask, dtype = bool)
        if mask.shape != (height, width):
            raise GridMismatch(f"mask shape {mask.shape} does not match planes {(height, width)}")

        planes = np.where(mask[np.newaxis, :, :], planes, 0.0)
        mask = mask.copy()
        planes.flags.writeable = False
        mask.flags.writeable = False

        self._planes = planes
        self._mask = mask
        self._geo = geo
        self._bands = tuple(bands)

    @classmethod
    def fromBandNames(cls, planes: np.ndarray, mask: Optional[np.ndarray], geo: GeoTransform,
                      names: Iterable[str]) -> "RasterGrid":
        return cls(planes, mask, geo, [describeBand(n) for n in names])

    @property
    def planes(self) -> np.ndarray:
        return self._planes

    @property
    def mask(self) -> np.ndarray:
        return self._mask

    @property
    def geo(self) -> GeoTransform:
        return self._geo

    @property
    def bands(self) -> tuple:
        return self._bands

    @property
    def bandNames(self) -> List[str]:
        return [b.name for b in self._bands]

    @property
    def width(self) -> int:
        return self._planes.shape[2]

    @property
    def height(self) -> int:
        return self._planes.shape[1]

    @property
    def bandCount(self) -> int:
        return self._planes.shape[0]

    @property
    def validCount(self) -> int:
        return int(self._mask.sum())

    @property
    def extent(self) -> RegionOfInterest:
        return RegionOfInterest(
            minX = self._geo.originX,
            minY = self._geo.originY - self.height * self._geo.pixelHeight,
            maxX = self._geo.originX + self.width * self._geo.pixelWidth,
            maxY = self._geo.originY,
            crsCode = self._geo.crsCode,
        )

    def hasBand(self, name: str) -> bool:
        return name in self.bandNames

    def bandIndex(self, name: str, owner: str = "grid") -> int:
        try:
            return self.bandNames.index(name)
        except ValueError:
            raise MissingBand(owner, name)

    def band(self, name: str, owner: str = "grid") -> np.ndarray:
        return self._planes[self.bandIndex(name, owner)]

    def select(self, names: Sequence[str], owner: str = "grid") -> "RasterGrid":
        indexes = [self.bandIndex(n, owner) for n in names]
        return RasterGrid(self._planes[indexes], self._mask, self._geo, [self._bands[i] for i in indexes])

    def withPlanes(self, planes: np.ndarray, mask: Optional[np.ndarray] = None,
                   bands: Optional[Sequence[BandDescriptor]] = None) -> "RasterGrid":
        return RasterGrid(planes, self._mask if mask is None else mask, self._geo,
                          self._bands if bands is None else bands)

    def sameLattice(self, other: "RasterGrid") -> bool:
        return (self.width == other.width and self.height == other.height
                and self._geo == other.geo)

    def validSamples(self, name: str) -> np.ndarray:
        return self.band(name)[self._mask]

    def __repr__(self):
        return (f"RasterGrid({self.width}x{self.height}, bands={self.bandNames}, "
                f"valid={self.validCount}, epsg={self._geo.crsCode})")
