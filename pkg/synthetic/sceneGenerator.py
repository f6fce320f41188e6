import logging
from concurrent.futures import ThreadPoolExecutor
from datetime import date, datetime, time, timedelta, timezone
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from catalog.directorySource import SIDECAR_SUFFIX, writeSidecar
from config import settings
from geotiff.geotiffWriter import writeGeoTiff
from geotiff.pngWriter import writePng
from models.bands import describeBand
from models.geo import GeoTransform, RegionOfInterest
from models.rasterGrid import RasterGrid
from models.sceneRecord import Catalog, FilterSpec, SceneRecord, WindowSpec

logger = logging.getLogger(__name__)

# Po Plain lies in UTM zone 32N
DEFAULT_CRS = 32632
DEFAULT_ORIGIN = (600000.0, 5000000.0)
BASE_RESOLUTION_M = 10.0
MIN_REFLECTANCE = 1e-4

# Winter bare-soil reflectance
DEFAULT_BASE_REFLECTANCE = {"B2": 0.08, "B3": 0.10, "B4": 0.12, "B8": 0.25, "B11": 0.30, "B12": 0.22}

# Damp channel fill: darker in SWIR, slightly brighter in NIR
DEFAULT_CHANNEL_CONTRAST = {"B2": -0.01, "B3": -0.01, "B4": -0.02, "B8": 0.02, "B11": -0.05, "B12": -0.05}

PROTOCOL_WINDOWS = [
    WindowSpec(name = "jan-mar", start = "01-01", end = "03-31"),
    WindowSpec(name = "oct-dec", start = "10-01", end = "12-31"),
]


class FeatureSpec(BaseModel):
    kind: Literal["palaeochannel", "moat-ring", "rectangular-earthwork"]
    contrast: Dict[str, float] = Field(..., description = "Per-band reflectance offset inside the feature")
    points: Optional[List[Tuple[float, float]]] = Field(None, description = "Channel centreline, map coordinates")
    width: Optional[float] = Field(None, gt = 0, description = "Channel width or earthwork ditch width, metres")
    center: Optional[Tuple[float, float]] = None
    innerRadius: Optional[float] = Field(None, ge = 0)
    outerRadius: Optional[float] = Field(None, gt = 0)
    bbox: Optional[Tuple[float, float, float, float]] = None

    @model_validator(mode = "after")
    def _checkGeometry(self):
        if not all(np.isfinite(v) for v in self.contrast.values()):
            raise ValueError("contrast must be finite")
        if self.kind == "palaeochannel":
            if not self.points or len(self.points) < 2 or self.width is None:
                raise ValueError("a palaeochannel needs at least 2 points and a width")
        elif self.kind == "moat-ring":
            if self.center is None or self.innerRadius is None or self.outerRadius is None:
                raise ValueError("a moat-ring needs center, innerRadius and outerRadius")
            if not self.innerRadius < self.outerRadius:
                raise ValueError("innerRadius must be less than outerRadius")
        else:
            if self.bbox is None or self.width is None:
                raise ValueError("a rectangular-earthwork needs a bbox and a width")
            if not (self.bbox[0] < self.bbox[2] and self.bbox[1] < self.bbox[3]):
                raise ValueError("earthwork bbox must be min_x,min_y,max_x,max_y")
        return self

    def footprintMask(self, geo: GeoTransform, width: int, height: int) -> np.ndarray:
        xs = geo.originX + (np.arange(width) + 0.5) * geo.pixelWidth
        ys = geo.originY - (np.arange(height) + 0.5) * geo.pixelHeight
        x, y = np.meshgrid(xs, ys)

        if self.kind == "palaeochannel":
            distance = np.full(x.shape, np.inf)
            for (x0, y0), (x1, y1) in zip(self.points[:-1], self.points[1:]):
                dx, dy = x1 - x0, y1 - y0
                length2 = dx * dx + dy * dy
                t = np.clip(((x - x0) * dx + (y - y0) * dy) / length2, 0.0, 1.0) if length2 else 0.0
                distance = np.minimum(distance, np.hypot(x - (x0 + t * dx), y - (y0 + t * dy)))
            return distance <= self.width / 2.0

        if self.kind == "moat-ring":
            radius = np.hypot(x - self.center[0], y - self.center[1])
            return (radius >= self.innerRadius) & (radius <= self.outerRadius)

        minX, minY, maxX, maxY = self.bbox
        outer = (x >= minX) & (x <= maxX) & (y >= minY) & (y <= maxY)
        inner = (x > minX + self.width) & (x < maxX - self.width) & (y > minY + self.width) & (y < maxY - self.width)
        return outer & ~inner


class SyntheticSceneSet:
    def __init__(self, catalog: Catalog, truthMask: np.ndarray, geo: GeoTransform, outDir: str):
        self.catalog = catalog
        self.truthMask = truthMask
        self.geo = geo
        self.outDir = outDir

    @property
    def extent(self) -> RegionOfInterest:
        return latticeExtent(self.geo, self.truthMask.shape[1], self.truthMask.shape[0])


def latticeExtent(geo: GeoTransform, width: int, height: int) -> RegionOfInterest:
    return RegionOfInterest(minX = geo.originX, minY = geo.originY - height * geo.pixelHeight,
                            maxX = geo.originX + width * geo.pixelWidth, maxY = geo.originY, crsCode = geo.crsCode)


def defaultFeatures(width: int = 512, height: int = 512, origin: Tuple[float, float] = DEFAULT_ORIGIN,
                    resolutionM: float = BASE_RESOLUTION_M, contrast: Optional[Dict[str, float]] = None) -> List[FeatureSpec]:
    """A meandering channel crossing the scene from west to east."""
    ox, oy = origin
    spanX, spanY = width * resolutionM, height * resolutionM
    points = [(ox + spanX * fx, oy - spanY * fy) for fx, fy in
              [(0.0, 0.45), (0.25, 0.35), (0.5, 0.55), (0.75, 0.45), (1.0, 0.6)]]
    return [FeatureSpec(kind = "palaeochannel", points = points, width = max(spanX / 20.0, 3 * resolutionM),
                        contrast = contrast or dict(DEFAULT_CHANNEL_CONTRAST))]


def sceneTimestamps(nScenes: int, spec: FilterSpec) -> List[datetime]:
    """Cycle the scenes through every (window, year) bucket, a week apart on revisits."""
    buckets = [(w, y) for y in spec.years for w in spec.windows]
    stamps = []
    for i in range(nScenes):
        window, year = buckets[i % len(buckets)]
        startMonth, startDay = (int(p) for p in window.start.split("-"))
        endMonth, endDay = (int(p) for p in window.end.split("-"))
        first = date(year, startMonth, startDay)
        last = date(year, endMonth, endDay)
        day = min(first + timedelta(days = 3 + 7 * (i // len(buckets))), last)
        stamps.append(datetime.combine(day, time(10, 30), tzinfo = timezone.utc))
    return stamps


def _bandLattice(band: str, geo: GeoTransform, width: int, height: int) -> Tuple[GeoTransform, int, int]:
    resolution = describeBand(band).nativeResolutionM or BASE_RESOLUTION_M
    factor = resolution / BASE_RESOLUTION_M
    bandGeo = geo.model_copy(update = {"pixelWidth": resolution, "pixelHeight": resolution})
    return bandGeo, max(1, int(round(width / factor))), max(1, int(round(height / factor)))


def _writeScene(index: int, acquiredAt: datetime, outDir: Path, geo: GeoTransform, width: int, height: int,
                baseReflectance: Dict[str, float], features: Sequence[FeatureSpec], noiseSd: float,
                seed: int, cloudCoverPct: float) -> SceneRecord:
    rng = np.random.default_rng([seed, index])
    sceneId = f"SYN_{acquiredAt:%Y%m%d}_{index:03d}"
    sceneDir = outDir / sceneId
    sceneDir.mkdir(parents = True, exist_ok = True)

    bandFiles = {}
    for band, base in baseReflectance.items():
        bandGeo, cols, rows = _bandLattice(band, geo, width, height)
        values = np.full((rows, cols), float(base))
        for feature in features:
            offset = feature.contrast.get(band, 0.0)
            if offset:
                values += offset * feature.footprintMask(bandGeo, cols, rows)
        if noiseSd > 0:
            values += rng.normal(0.0, noiseSd, size = values.shape)
        values = np.clip(values, MIN_REFLECTANCE, 1.0)

        path = sceneDir / f"{sceneId}_{band}.tif"
        writeGeoTiff(RasterGrid.fromBandNames(values, None, bandGeo, [band]), str(path), sampleFormat = "uint16")
        bandFiles[band] = str(path)

    record = SceneRecord(sceneId, acquiredAt, cloudCoverPct, bandFiles, latticeExtent(geo, width, height))
    writeSidecar(record, sceneDir / f"{sceneId}{SIDECAR_SUFFIX}")
    return record


def generateSceneSet(outDir: str, nScenes: int = 12, baseReflectance: Optional[Dict[str, float]] = None,
                     features: Optional[Sequence[FeatureSpec]] = None, noiseSd: float = 0.05, seed: int = 0,
                     width: int = 512, height: int = 512, origin: Tuple[float, float] = DEFAULT_ORIGIN,
                     crsCode: int = DEFAULT_CRS, spec: Optional[FilterSpec] = None,
                     workers: Optional[int] = None) -> SyntheticSceneSet:
    """
    Write nScenes scene directories (one uint16 GeoTIFF per band plus a sidecar) and
    truth_mask.png. Each band is written at its native resolution; every pixel is
    base + planted contrast inside features + independent Gaussian noise per scene.
    The output is a pure function of the arguments.
    """
    if nScenes < 1:
        raise ValueError(f"nScenes must be >= 1, got {nScenes}")
    if noiseSd < 0:
        raise ValueError(f"noiseSd must be >= 0, got {noiseSd}")
    if width % 2 or height % 2:
        raise ValueError("width and height must be even so 20 m bands tile the 10 m lattice")

    baseReflectance = dict(baseReflectance or DEFAULT_BASE_REFLECTANCE)
    if features is None:
        features = defaultFeatures(width, height, origin)
    spec = spec or FilterSpec(windows = PROTOCOL_WINDOWS, yearStart = 2015, yearEnd = 2020)

    root = Path(outDir)
    root.mkdir(parents = True, exist_ok = True)
    geo = GeoTransform(originX = origin[0], originY = origin[1], pixelWidth = BASE_RESOLUTION_M,
                       pixelHeight = BASE_RESOLUTION_M, crsCode = crsCode)

    stamps = sceneTimestamps(nScenes, spec)
    clouds = np.random.default_rng([seed, nScenes, 0]).uniform(0.0, min(15.0, spec.maxCloudPct), size = nScenes)
    logger.info(f"Generating {nScenes} synthetic scenes ({width}x{height}, {len(baseReflectance)} bands, "
                f"noise {noiseSd}) in {outDir}")

    with ThreadPoolExecutor(max_workers = max(1, workers or settings.WORKERS)) as pool:
        records = list(pool.map(
            lambda i: _writeScene(i, stamps[i], root, geo, width, height, baseReflectance, features,
                                  noiseSd, seed, round(float(clouds[i]), 2)),
            range(nScenes),
        ))

    truth = np.zeros((height, width), dtype = bool)
    for feature in features:
        truth |= feature.footprintMask(geo, width, height)
    writePng(np.where(truth, 255, 0).astype(np.uint8), str(root / "truth_mask.png"))

    logger.info(f"Synthetic scene set ready: {nScenes} scenes, {int(truth.sum())} feature pixels ✓")
    return SyntheticSceneSet(Catalog(records), truth, geo, str(root))

