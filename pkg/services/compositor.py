import logging
import time
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from catalog.filtering import assignBucket, filterCatalog
from geotiff.geotiffReader import readGeoTiff
from models.bands import describeBand
from models.errors import (ConfigError, CrsMismatch, DisjointRoi, EmptyBucket, EmptyInput, GridMismatch,
                           MissingBand)
from models.geo import GeoTransform, RegionOfInterest
from models.products import CompositeStack, WindowComposites
from models.rasterGrid import RasterGrid
from models.sceneRecord import Catalog, FilterSpec, SceneRecord
from services.rasterOps import crop, placeOnLattice, resampleTo, roiLattice, scaleReflectance
from utils.strips import mapStrips

logger = logging.getLogger(__name__)

DEFAULT_REFLECTANCE_SCALE = 1e-4
DEFAULT_RESOLUTION_M = 10.0
RESAMPLE_METHOD = "bilinear"
COMPOSITE_MODES = ("pooled", "per-year", "both")


def _uniqueBands(bands: Sequence[str]) -> List[str]:
    seen = []
    for b in bands:
        if b not in seen:
            seen.append(b)
    return seen


def loadSceneBand(record: SceneRecord, band: str, roi: RegionOfInterest,
                  reflectanceScale: float = DEFAULT_REFLECTANCE_SCALE,
                  targetResolutionM: float = DEFAULT_RESOLUTION_M) -> RasterGrid:
    """One band of a scene, scaled to reflectance and cut to roi on the target lattice."""
    path = record.bandFiles.get(band)
    if path is None:
        raise MissingBand(record.sceneId, band)

    grid, _ = readGeoTiff(path)
    if grid.geo.crsCode != roi.crsCode:
        raise CrsMismatch(roi.crsCode, grid.geo.crsCode)
    grid = scaleReflectance(grid, reflectanceScale)

    if grid.geo.pixelWidth == targetResolutionM and grid.geo.pixelHeight == targetResolutionM:
        return crop(grid, roi)

    # one native pixel of margin so the interpolation window covers the ROI edge
    coarse = crop(grid, roi.grown(max(grid.geo.pixelWidth, grid.geo.pixelHeight)))
    return crop(resampleTo(coarse, targetResolutionM, RESAMPLE_METHOD), roi)


def loadScene(record: SceneRecord, bands: Sequence[str], roi: RegionOfInterest,
              reflectanceScale: float = DEFAULT_REFLECTANCE_SCALE,
              targetResolutionM: float = DEFAULT_RESOLUTION_M,
              lattice: Optional[Tuple[GeoTransform, int, int]] = None) -> RasterGrid:
    """
    All requested bands of a scene on the ROI lattice. Without an explicit lattice the
    scene's first band fixes its phase. Raises DisjointRoi when a band covers no pixel
    centre of roi.
    """
    missing = [b for b in bands if b not in record.bandFiles]
    if missing:
        raise MissingBand(record.sceneId, missing[0])

    grids = [loadSceneBand(record, b, roi, reflectanceScale, targetResolutionM) for b in bands]
    if lattice is None:
        lattice = roiLattice(grids[0].geo, roi)

    placed = []
    for band, g in zip(bands, grids):
        try:
            placed.append(placeOnLattice(g, *lattice))
        except GridMismatch as e:
            raise GridMismatch(f"{record.sceneId}: band {band}: {e}") from e

    # a pixel is valid only where every band is valid
    mask = np.logical_and.reduce([g.mask for g in placed])
    planes = np.concatenate([g.planes for g in placed])
    return RasterGrid(planes, mask, lattice[0], [describeBand(b) for b in bands])


def meanComposite(scenes: Sequence[SceneRecord], bands: Sequence[str], roi: RegionOfInterest,
                  reflectanceScale: float = DEFAULT_REFLECTANCE_SCALE,
                  targetResolutionM: float = DEFAULT_RESOLUTION_M,
                  workers: Optional[int] = None) -> CompositeStack:
    """
    Per-pixel arithmetic mean over valid observations.

    Scenes are streamed one at a time in (acquiredAt, sceneId) order into double-precision
    running sums and counts, accumulated per row strip.
    """
    if not scenes:
        raise EmptyInput("no scenes to composite")
    bands = _uniqueBands(bands)
    if not bands:
        raise EmptyInput("no bands requested")

    ordered = sorted(scenes, key = lambda r: r.sortKey)
    for record in ordered:
        for band in bands:
            if band not in record.bandFiles:
                raise MissingBand(record.sceneId, band)

    startTime = time.time()
    sums = None
    counts = None
    lattice = None
    skipped = []

    for record in ordered:
        try:
            grid = loadScene(record, bands, roi, reflectanceScale, targetResolutionM, lattice)
        except DisjointRoi:
            # footprint touches the ROI but covers no pixel centre: zero observations
            skipped.append(record.sceneId)
            logger.warning(f"Scene {record.sceneId} covers no pixel centre of the ROI, skipping")
            continue

        if lattice is None:
            lattice = (grid.geo, grid.width, grid.height)
            sums = np.zeros(grid.planes.shape, dtype = np.float64)
            counts = np.zeros(grid.mask.shape, dtype = np.int64)

        def accumulate(row0: int, row1: int):
            # invalid samples are stored as 0.0 so they add nothing
            sums[:, row0:row1] += grid.planes[:, row0:row1]
            counts[row0:row1] += grid.mask[row0:row1]

        mapStrips(accumulate, grid.height, workers)

    if lattice is None:
        raise EmptyInput(f"none of {len(ordered)} scenes covers a pixel centre of the ROI")

    valid = counts > 0
    means = np.divide(sums, counts[np.newaxis], out = np.zeros_like(sums), where = valid[np.newaxis])
    composite = RasterGrid(means, valid, lattice[0], [describeBand(b) for b in bands])

    elapsed = time.time() - startTime
    logger.info(f"Composited {len(ordered)} scenes x {len(bands)} bands -> {composite.width}x{composite.height}, "
                f"{composite.validCount} valid pixels ({elapsed:.2f}s)")

    provenance = {
        "sceneIds": [r.sceneId for r in ordered if r.sceneId not in skipped],
        "bands": list(bands),
        "roi": roi.toDict(),
        "reflectanceScale": reflectanceScale,
        "targetResolutionM": targetResolutionM,
        "resampling": RESAMPLE_METHOD,
        "reduction": "mean",
    }
    return CompositeStack(composite, counts, provenance)


def windowComposites(catalog: Catalog, spec: FilterSpec, bands: Sequence[str], mode: str = "pooled",
                     reflectanceScale: float = DEFAULT_REFLECTANCE_SCALE,
                     targetResolutionM: float = DEFAULT_RESOLUTION_M,
                     workers: Optional[int] = None) -> WindowComposites:
    """
    Composite every seasonal bucket independently. Pooled buckets are keyed
    (window, "yearStart-yearEnd"), per-year buckets (window, "YYYY"). A bucket
    with no scenes is reported in emptyBuckets and does not stop the others.
    """
    if mode not in COMPOSITE_MODES:
        raise ValueError(f"mode must be one of {COMPOSITE_MODES}, got '{mode}'")
    if spec.roi is None:
        raise ConfigError("roi", "a region of interest is required for compositing")

    filtered = filterCatalog(catalog, spec)
    groups: Dict[Tuple[str, str], List[SceneRecord]] = {}
    for window in spec.windows:
        if mode in ("pooled", "both"):
            groups[(window.name, spec.pooledPeriod)] = []
        if mode in ("per-year", "both"):
            for year in spec.years:
                groups[(window.name, str(year))] = []

    for record in filtered:
        windowName, year = assignBucket(record, spec)
        if (windowName, spec.pooledPeriod) in groups:
            groups[(windowName, spec.pooledPeriod)].append(record)
        if (windowName, str(year)) in groups:
            groups[(windowName, str(year))].append(record)

    composites, empty = {}, {}
    for key, records in groups.items():
        if not records:
            empty[key] = EmptyBucket(*key)
            logger.warning(f"Bucket {key[0]}/{key[1]} is empty")
            continue

        stack = meanComposite(records, bands, spec.roi, reflectanceScale, targetResolutionM, workers)
        composites[key] = stack.withProvenance(window = key[0], period = key[1], filterSpec = spec.toDict())
        logger.info(f"Bucket {key[0]}/{key[1]}: {len(records)} scenes ✓")

    return WindowComposites(composites, empty)
