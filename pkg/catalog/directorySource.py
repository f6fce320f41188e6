import json
import logging
import os
from datetime import datetime
from pathlib import Path
from typing import Dict

from pydantic import BaseModel, Field, ValidationError

from catalog.sceneSource import SceneSource
from models.bands import S2_BANDS
from models.errors import MalformedSidecar
from models.geo import RegionOfInterest
from models.sceneRecord import Catalog, FilterSpec, SceneRecord, isRemote

logger = logging.getLogger(__name__)

SIDECAR_SUFFIX = ".scene.json"


class SidecarFootprint(BaseModel):
    min_x: float
    min_y: float
    max_x: float
    max_y: float
    epsg: int


class SceneSidecar(BaseModel):
    scene_id: str = Field(..., min_length = 1)
    acquired_at: datetime = Field(..., description = "RFC 3339 timestamp, UTC assumed when no offset")
    cloud_cover_pct: float = Field(..., ge = 0, le = 100)
    footprint: SidecarFootprint
    bands: Dict[str, str] = Field(..., min_length = 1)


def _fieldName(error: dict) -> str:
    return ".".join(str(part) for part in error["loc"]) or "<document>"


def parseSidecar(path: Path) -> SceneRecord:
    try:
        document = json.loads(path.read_text(encoding = "utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise MalformedSidecar(str(path), "<document>", f"not valid JSON: {e}")

    try:
        sidecar = SceneSidecar.model_validate(document)
    except ValidationError as e:
        first = e.errors()[0]
        raise MalformedSidecar(str(path), _fieldName(first), first["msg"])

    for band in sidecar.bands:
        if band not in S2_BANDS:
            raise MalformedSidecar(str(path), f"bands.{band}", "not a Sentinel-2 band name")

    try:
        footprint = RegionOfInterest(
            minX = sidecar.footprint.min_x, minY = sidecar.footprint.min_y,
            maxX = sidecar.footprint.max_x, maxY = sidecar.footprint.max_y,
            crsCode = sidecar.footprint.epsg,
        )
    except ValidationError as e:
        raise MalformedSidecar(str(path), "footprint", e.errors()[0]["msg"])

    # relative band paths are relative to the sidecar
    bandFiles = {
        band: p if isRemote(p) or os.path.isabs(p) else str((path.parent / p).resolve())
        for band, p in sidecar.bands.items()
    }
    return SceneRecord(sidecar.scene_id, sidecar.acquired_at, sidecar.cloud_cover_pct, bandFiles, footprint)


def writeSidecar(record: SceneRecord, path: Path):
    path = Path(path)
    document = record.toDict()
    document["bands"] = {
        band: os.path.relpath(p, path.parent) if not isRemote(p) else p
        for band, p in record.bandFiles.items()
    }
    path.write_text(json.dumps(document, indent = 2), encoding = "utf-8")


def ingestDirectory(root: str) -> Catalog:
    rootPath = Path(root)
    if not rootPath.is_dir():
        raise FileNotFoundError(f"Scene directory not found: {root}")

    records = [parseSidecar(p) for p in sorted(rootPath.rglob(f"*{SIDECAR_SUFFIX}"))]
    catalog = Catalog(records)
    logger.info(f"Ingested {len(catalog)} scenes from {root}")
    return catalog


class DirectorySource(SceneSource):
    def __init__(self, root: str):
        self._root = root

    @property
    def root(self) -> str:
        return self._root

    def loadCatalog(self, spec: FilterSpec) -> Catalog:
        return ingestDirectory(self._root)

    def getSourceName(self) -> str:
        return f"directory {self._root}"
