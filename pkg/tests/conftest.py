import os
from datetime import datetime
from typing import Optional, Sequence

import numpy as np
import pytest

from geotiff.geotiffWriter import writeGeoTiff
from models.geo import GeoTransform, RegionOfInterest
from models.rasterGrid import RasterGrid
from models.sceneRecord import FilterSpec, SceneRecord
from synthetic.sceneGenerator import PROTOCOL_WINDOWS, generateSceneSet
from stacServer import StacServer, createStacApp

UTM32N = 32632


def buildGrid(planes, mask = None, origin = (0.0, 100.0), resolution = 10.0, crsCode = UTM32N,
              names: Optional[Sequence[str]] = None) -> RasterGrid:
    planes = np.asarray(planes, dtype = np.float64)
    if planes.ndim == 2:
        planes = planes[np.newaxis]
    names = names or [f"B{i + 2}" for i in range(planes.shape[0])]
    geo = GeoTransform(originX = origin[0], originY = origin[1], pixelWidth = resolution,
                       pixelHeight = resolution, crsCode = crsCode)
    return RasterGrid.fromBandNames(planes, mask, geo, names)


def writeScene(directory, sceneId: str, acquiredAt: datetime, bands: dict, cloud: float = 5.0,
               mask = None, origin = (0.0, 100.0), resolution = 10.0) -> SceneRecord:
    """Float32 reflectance GeoTIFF per band, no sidecar. mask may be one mask or a band -> mask dict."""
    os.makedirs(directory, exist_ok = True)
    files = {}
    grid = None
    for band, plane in bands.items():
        bandMask = mask.get(band) if isinstance(mask, dict) else mask
        grid = buildGrid(plane, bandMask, origin, resolution, names = [band])
        path = os.path.join(str(directory), f"{sceneId}_{band}.tif")
        writeGeoTiff(grid, path, sampleFormat = "float32")
        files[band] = path
    return SceneRecord(sceneId, acquiredAt, cloud, files, grid.extent)


@pytest.fixture
def makeGrid():
    return buildGrid


@pytest.fixture
def makeScene():
    return writeScene


@pytest.fixture(scope = "session")
def sceneSet(tmp_path_factory):
    # one scene per (window, year) bucket over 2015-2020
    return generateSceneSet(str(tmp_path_factory.mktemp("scenes")), nScenes = 12, width = 64, height = 64,
                            seed = 7, workers = 2)


@pytest.fixture(scope = "session")
def stacFixture(tmp_path_factory):
    spec = FilterSpec(windows = PROTOCOL_WINDOWS, yearStart = 2015, yearEnd = 2016)
    sceneSet = generateSceneSet(str(tmp_path_factory.mktemp("stac-scenes")), nScenes = 6, width = 16, height = 16,
                                seed = 3, spec = spec, workers = 2)

    assetKeys = {"B2": "blue", "B3": "green", "B4": "red", "B8": "nir", "B11": "B11", "B12": "swir22"}
    files, items = {}, []
    for record in sceneSet.catalog:
        assets = {}
        for band, path in record.bandFiles.items():
            name = f"{record.sceneId}/{os.path.basename(path)}"
            with open(path, "rb") as f:
                files[name] = f.read()
            assets[assetKeys[band]] = {"href": f"/files/{name}", "type": "image/tiff"}
        footprint = record.footprint
        items.append({
            "type": "Feature",
            "stac_version": "1.0.0",
            "id": record.sceneId,
            "bbox": [9.0, 45.0, 9.1, 45.1],
            "properties": {
                "datetime": record.acquiredAt.strftime("%Y-%m-%dT%H:%M:%SZ"),
                "eo:cloud_cover": record.cloudCoverPct,
                "proj:epsg": footprint.crsCode,
                "proj:bbox": [footprint.minX, footprint.minY, footprint.maxX, footprint.maxY],
            },
            "assets": assets,
        })

    # the second oct-dec 2015 scene is too cloudy, the July scene falls outside both windows
    cloudy = next(item for item in items if item["id"].endswith("_005"))
    cloudy["properties"]["eo:cloud_cover"] = 55.0
    july = {**items[0], "id": "SYN_20150715_900",
            "properties": {**items[0]["properties"], "datetime": "2015-07-15T10:30:00Z"}}
    items.append(july)

    server = StacServer(createStacApp(items, files))
    server.start()
    yield server, sceneSet
    server.stop()


@pytest.fixture
def protocolSpec():
    return FilterSpec(windows = PROTOCOL_WINDOWS, yearStart = 2015, yearEnd = 2020, maxCloudPct = 20.0)


@pytest.fixture
def sceneExtent(sceneSet) -> RegionOfInterest:
    return sceneSet.extent
