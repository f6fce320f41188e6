import logging
import os
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from geotiff.pngWriter import writePng
from models.errors import EmptyBand
from models.products import (CompositeStack, CompositeTriple, Histogram, HsvProduct, IndexProduct, PcaResult,
                             StretchParams)
from models.rasterGrid import RasterGrid
from utils.strips import mapStrips

logger = logging.getLogger(__name__)

APPROXIMATE_BINS = 1024
REPORT_BINS = 256

Renderable = Union[RasterGrid, CompositeStack, CompositeTriple, HsvProduct, IndexProduct, PcaResult]


def toGrid(source: Renderable) -> RasterGrid:
    if isinstance(source, RasterGrid):
        return source
    if isinstance(source, PcaResult):
        return source.scores
    return source.grid


def _plane(band: Union[RasterGrid, np.ndarray], mask: Optional[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(band, RasterGrid):
        if band.bandCount != 1:
            raise ValueError(f"expected a single-band grid, got {band.bandCount} bands")
        return band.planes[0], band.mask
    plane = np.asarray(band, dtype = np.float64)
    if plane.ndim != 2:
        raise ValueError(f"expected a 2-D plane, got shape {plane.shape}")
    return plane, np.ones(plane.shape, dtype = bool) if mask is None else np.asarray(mask, dtype = bool)


# ====================================================================
# PERCENTILES

def _approximatePercentiles(values: np.ndarray, percents: Sequence[float]) -> List[float]:
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        return [lo for _ in percents]

    counts, edges = np.histogram(values, bins = APPROXIMATE_BINS, range = (lo, hi))
    cumulative = np.cumsum(counts)
    resolved = []
    for pct in percents:
        rank = pct / 100.0 * (len(values) - 1)
        index = int(np.searchsorted(cumulative, rank, side = "right"))
        index = min(index, APPROXIMATE_BINS - 1)
        before = cumulative[index - 1] if index else 0
        within = (rank - before) / counts[index] if counts[index] else 0.0
        resolved.append(float(edges[index] + np.clip(within, 0.0, 1.0) * (edges[index + 1] - edges[index])))
    return resolved


def percentileCut(band: Union[RasterGrid, np.ndarray], lowerPct: float = 2.0, upperPct: float = 98.0,
                  mask: Optional[np.ndarray] = None, approximate: bool = False) -> StretchParams:
    """
    Cumulative count cut. Exact percentiles use linear interpolation at position p*(N-1)
    of the sorted valid samples; the approximate path reads them off a 1024-bin
    histogram and is accurate to one bin width.
    """
    params = StretchParams(lowerPct = lowerPct, upperPct = upperPct)
    plane, mask = _plane(band, mask)
    values = plane[mask]
    if values.size == 0:
        raise EmptyBand("no valid pixels to compute percentiles over")

    if approximate:
        lower, upper = _approximatePercentiles(values, [lowerPct, upperPct])
    else:
        lower, upper = np.percentile(values, [lowerPct, upperPct], method = "linear")

    return params.model_copy(update = {"lowerValue": float(lower), "upperValue": float(max(lower, upper))})


# ====================================================================
# STRETCH + RENDER

def stretchToBytes(band: Union[RasterGrid, np.ndarray], params: StretchParams,
                   mask: Optional[np.ndarray] = None, workers: Optional[int] = None) -> np.ndarray:
    if not params.resolved:
        raise ValueError("stretch parameters are not resolved")
    plane, mask = _plane(band, mask)
    lo, hi = params.lowerValue, params.upperValue
    out = np.zeros(plane.shape, dtype = np.uint8)
    if hi == lo:
        return out

    def stretchRows(row0: int, row1: int):
        clamped = np.clip(plane[row0:row1], lo, hi)
        # round half away from zero; the scaled value is never negative
        scaled = np.floor(255.0 * (clamped - lo) / (hi - lo) + 0.5)
        out[row0:row1] = np.where(mask[row0:row1], scaled, 0).astype(np.uint8)

    mapStrips(stretchRows, plane.shape[0], workers)
    return out


def stretchToUnit(band: Union[RasterGrid, np.ndarray], params: StretchParams,
                  mask: Optional[np.ndarray] = None) -> np.ndarray:
    plane, mask = _plane(band, mask)
    lo, hi = params.lowerValue, params.upperValue
    if hi == lo:
        return np.zeros(plane.shape)
    return np.where(mask, (np.clip(plane, lo, hi) - lo) / (hi - lo), 0.0)


def autoStretch(source: Renderable, lowerPct: float = 2.0, upperPct: float = 98.0,
                approximate: bool = False) -> List[StretchParams]:
    grid = toGrid(source)
    return [percentileCut(grid.planes[i], lowerPct, upperPct, grid.mask, approximate) for i in range(grid.bandCount)]


def unitStretch(count: int) -> List[StretchParams]:
    """Fixed [0, 1] display range, used for HSV products."""
    return [StretchParams(lowerPct = 0.0, upperPct = 100.0, lowerValue = 0.0, upperValue = 1.0)
            for _ in range(count)]


def render(source: Renderable, params: Sequence[StretchParams], workers: Optional[int] = None) -> np.ndarray:
    """
    Gray8 (h, w) for a single band, RGB8 (h, w, 3) for three. PCA scores render
    PC1-PC2-PC3 as RGB, or PC1 alone when there are fewer than three components.
    """
    grid = toGrid(source)
    if isinstance(source, PcaResult):
        channels = 3 if grid.bandCount >= 3 else 1
    elif grid.bandCount in (1, 3):
        channels = grid.bandCount
    else:
        raise ValueError(f"render needs 1 or 3 bands, got {grid.bandCount}")
    if len(params) < channels:
        raise ValueError(f"{channels} stretch parameters needed, got {len(params)}")

    planes = [stretchToBytes(grid.planes[i], params[i], grid.mask, workers) for i in range(channels)]
    if channels == 1:
        return planes[0]
    return np.stack(planes, axis = -1)


# ====================================================================
# HISTOGRAMS + REPORTS

def histogram(band: Union[RasterGrid, np.ndarray], nbins: int = REPORT_BINS,
              valueRange: Optional[Tuple[float, float]] = None, mask: Optional[np.ndarray] = None,
              workers: Optional[int] = None) -> Histogram:
    """
    Equal-width histogram of valid samples. The last bin is closed on both ends and
    values outside an explicit range are counted in the edge bins.
    """
    if nbins < 1:
        raise ValueError(f"nbins must be >= 1, got {nbins}")
    plane, mask = _plane(band, mask)
    values = plane[mask]
    if values.size == 0:
        raise EmptyBand("no valid pixels to histogram")

    if valueRange is None:
        lo, hi = float(values.min()), float(values.max())
    else:
        lo, hi = float(valueRange[0]), float(valueRange[1])
        if not lo <= hi:
            raise ValueError(f"histogram range must be ascending, got {valueRange}")
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5

    edges = np.linspace(lo, hi, nbins + 1)

    def countRows(row0: int, row1: int) -> np.ndarray:
        rowValues = plane[row0:row1][mask[row0:row1]]
        # bins follow the published edges exactly, [edge_i, edge_i+1)
        index = np.searchsorted(edges, rowValues, side = "right") - 1
        return np.bincount(np.clip(index, 0, nbins - 1), minlength = nbins)

    counts = np.sum(mapStrips(countRows, plane.shape[0], workers), axis = 0)
    return Histogram(edges, counts, int(values.size))


def bandReport(source: Renderable, outDir: str, lowerPct: float = 2.0, upperPct: float = 98.0,
               nbins: int = REPORT_BINS) -> List[Tuple[str, str]]:
    """One Gray8 PNG and one lo,hi,count CSV per band, named NN_<band>."""
    grid = toGrid(source)
    os.makedirs(outDir, exist_ok = True)

    written = []
    for i, name in enumerate(grid.bandNames):
        stem = os.path.join(outDir, f"{i + 1:02d}_{name}")
        params = percentileCut(grid.planes[i], lowerPct, upperPct, grid.mask)
        writePng(stretchToBytes(grid.planes[i], params, grid.mask), stem + ".png")
        histogram(grid.planes[i], nbins, mask = grid.mask).toDataFrame().to_csv(stem + ".csv", index = False)
        written.append((stem + ".png", stem + ".csv"))

    logger.info(f"Band report: {len(written)} bands -> {outDir}")
    return written
