import logging
import math
from typing import Tuple

import numpy as np

from models.errors import CrsMismatch, DisjointRoi, GridMismatch
from models.geo import GeoTransform, RegionOfInterest
from models.rasterGrid import RasterGrid

logger = logging.getLogger(__name__)

RESAMPLE_METHODS = ("nearest", "bilinear")

# Index arithmetic tolerance for pixel centres sitting exactly on an ROI edge
_EDGE_EPS = 1e-9
# Largest fractional pixel offset still treated as the same lattice
_LATTICE_EPS = 1e-6


def _centreWindow(geo: GeoTransform, roi: RegionOfInterest) -> Tuple[int, int, int, int]:
    """Unclamped (col0, row0, col1, row1) of lattice pixels whose centres lie inside roi."""
    if roi.crsCode != geo.crsCode:
        raise CrsMismatch(geo.crsCode, roi.crsCode)

    col0 = math.ceil((roi.minX - geo.originX) / geo.pixelWidth - 0.5 - _EDGE_EPS)
    col1 = math.floor((roi.maxX - geo.originX) / geo.pixelWidth - 0.5 + _EDGE_EPS)
    row0 = math.ceil((geo.originY - roi.maxY) / geo.pixelHeight - 0.5 - _EDGE_EPS)
    row1 = math.floor((geo.originY - roi.minY) / geo.pixelHeight - 0.5 + _EDGE_EPS)
    return col0, row0, col1, row1


def cropWindow(grid: RasterGrid, roi: RegionOfInterest) -> Tuple[int, int, int, int]:
    """Return (col0, row0, col1, row1), inclusive, of pixels whose centres lie inside roi."""
    col0, row0, col1, row1 = _centreWindow(grid.geo, roi)

    col0, row0 = max(col0, 0), max(row0, 0)
    col1, row1 = min(col1, grid.width - 1), min(row1, grid.height - 1)

    if col0 > col1 or row0 > row1:
        raise DisjointRoi(f"ROI {roi.minX},{roi.minY},{roi.maxX},{roi.maxY} does not cover any pixel centre of {grid}")

    return col0, row0, col1, row1


def roiLattice(geo: GeoTransform, roi: RegionOfInterest) -> Tuple[GeoTransform, int, int]:
    """
    The full pixel lattice of roi in the phase and resolution of geo, whatever part of
    it a particular raster happens to cover. Returns (geo, width, height).
    """
    col0, row0, col1, row1 = _centreWindow(geo, roi)
    if col0 > col1 or row0 > row1:
        raise DisjointRoi(f"ROI {roi.minX},{roi.minY},{roi.maxX},{roi.maxY} holds no pixel centre at "
                          f"{geo.pixelWidth}x{geo.pixelHeight} m")
    return geo.shifted(col0, row0), col1 - col0 + 1, row1 - row0 + 1


def placeOnLattice(grid: RasterGrid, lattice: GeoTransform, width: int, height: int) -> RasterGrid:
    """Paste grid into a width x height canvas on lattice. Pixels it does not cover are invalid."""
    geo = grid.geo
    if geo.crsCode != lattice.crsCode:
        raise CrsMismatch(lattice.crsCode, geo.crsCode)
    if not (math.isclose(geo.pixelWidth, lattice.pixelWidth) and math.isclose(geo.pixelHeight, lattice.pixelHeight)):
        raise GridMismatch(f"{grid} has {geo.pixelWidth}x{geo.pixelHeight} m pixels, lattice has "
                           f"{lattice.pixelWidth}x{lattice.pixelHeight} m")

    colOffset = (geo.originX - lattice.originX) / lattice.pixelWidth
    rowOffset = (lattice.originY - geo.originY) / lattice.pixelHeight
    col, row = int(round(colOffset)), int(round(rowOffset))
    if abs(colOffset - col) > _LATTICE_EPS or abs(rowOffset - row) > _LATTICE_EPS:
        raise GridMismatch(f"{grid} is offset by a fraction of a pixel ({colOffset:.4f}, {rowOffset:.4f}) from the lattice")

    if (col, row, grid.width, grid.height) == (0, 0, width, height):
        return RasterGrid(grid.planes, grid.mask, lattice, grid.bands)

    planes = np.zeros((grid.bandCount, height, width))
    mask = np.zeros((height, width), dtype = bool)
    dc0, dr0 = max(col, 0), max(row, 0)
    dc1, dr1 = min(col + grid.width, width), min(row + grid.height, height)
    if dc0 < dc1 and dr0 < dr1:
        planes[:, dr0:dr1, dc0:dc1] = grid.planes[:, dr0 - row:dr1 - row, dc0 - col:dc1 - col]
        mask[dr0:dr1, dc0:dc1] = grid.mask[dr0 - row:dr1 - row, dc0 - col:dc1 - col]
    return RasterGrid(planes, mask, lattice, grid.bands)


def crop(grid: RasterGrid, roi: RegionOfInterest) -> RasterGrid:
    col0, row0, col1, row1 = cropWindow(grid, roi)

    planes = grid.planes[:, row0:row1 + 1, col0:col1 + 1]
    mask = grid.mask[row0:row1 + 1, col0:col1 + 1]
    return RasterGrid(planes, mask, grid.geo.shifted(col0, row0), grid.bands)


def _nearestIndex(nOut: int, nSrc: int, ratio: float) -> np.ndarray:
    positions = (np.arange(nOut) + 0.5) * ratio - 0.5
    return np.clip(np.floor(positions + 0.5).astype(np.int64), 0, nSrc - 1)


def _bilinearAxis(nOut: int, nSrc: int, ratio: float):
    positions = np.clip((np.arange(nOut) + 0.5) * ratio - 0.5, 0, nSrc - 1)
    lower = np.floor(positions).astype(np.int64)
    upper = np.minimum(lower + 1, nSrc - 1)
    return lower, upper, positions - lower


def resampleTo(grid: RasterGrid, targetResolutionM: float, method: str = "bilinear") -> RasterGrid:
    if not targetResolutionM > 0:
        raise ValueError(f"targetResolutionM must be positive, got {targetResolutionM}")
    if method not in RESAMPLE_METHODS:
        raise ValueError(f"Unknown resampling method '{method}', expected one of {RESAMPLE_METHODS}")

    geo = grid.geo
    outWidth = max(1, int(round(grid.width * geo.pixelWidth / targetResolutionM)))
    outHeight = max(1, int(round(grid.height * geo.pixelHeight / targetResolutionM)))
    ratioX = targetResolutionM / geo.pixelWidth
    ratioY = targetResolutionM / geo.pixelHeight
    outGeo = geo.model_copy(update = {"pixelWidth": float(targetResolutionM),
                                      "pixelHeight": float(targetResolutionM)})

    if method == "nearest":
        cols = _nearestIndex(outWidth, grid.width, ratioX)
        rows = _nearestIndex(outHeight, grid.height, ratioY)
        planes = grid.planes[:, rows[:, None], cols[None, :]]
        mask = grid.mask[rows[:, None], cols[None, :]]
        return RasterGrid(planes, mask, outGeo, grid.bands)

    col0, col1, fx = _bilinearAxis(outWidth, grid.width, ratioX)
    row0, row1, fy = _bilinearAxis(outHeight, grid.height, ratioY)

    weightSum = np.zeros((outHeight, outWidth))
    accum = np.zeros((grid.bandCount, outHeight, outWidth))
    corners = [
        (row0, col0, np.outer(1.0 - fy, 1.0 - fx)),
        (row0, col1, np.outer(1.0 - fy, fx)),
        (row1, col0, np.outer(fy, 1.0 - fx)),
        (row1, col1, np.outer(fy, fx)),
    ]
    for rows, cols, weight in corners:
        validWeight = weight * grid.mask[rows[:, None], cols[None, :]]
        weightSum += validWeight
        accum += validWeight[np.newaxis] * grid.planes[:, rows[:, None], cols[None, :]]

    mask = weightSum > 0
    planes = np.divide(accum, weightSum[np.newaxis], out = np.zeros_like(accum), where = mask[np.newaxis])
    return RasterGrid(planes, mask, outGeo, grid.bands)


def scaleReflectance(grid: RasterGrid, factor: float) -> RasterGrid:
    if not factor > 0:
        raise ValueError(f"Reflectance scale factor must be positive, got {factor}")

    return grid.withPlanes(grid.planes * factor)


def toFloat32Precision(grid: RasterGrid) -> RasterGrid:
    """Round samples to what a float32 GeoTIFF stores, so file-chained stages see the same values."""
    return grid.withPlanes(grid.planes.astype(np.float32).astype(np.float64))
