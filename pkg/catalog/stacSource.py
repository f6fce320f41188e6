import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional
from urllib.parse import urljoin, urlparse

import requests

from catalog.sceneSource import SceneSource
from config import settings
from models.bands import normalizeBandName
from models.errors import HttpError, MalformedResponse
from models.geo import RegionOfInterest
from models.sceneRecord import Catalog, FilterSpec, SceneRecord, isRemote

logger = logging.getLogger(__name__)

WGS84 = 4326
PAGE_LIMIT = 100
MAX_PAGES = 10000
DOWNLOAD_CHUNK = 1 << 16

# STAC eo:common_name asset keys used by Sentinel-2 collections
COMMON_NAME_BANDS = {
    "coastal": "B1",
    "blue": "B2",
    "green": "B3",
    "red": "B4",
    "rededge1": "B5",
    "rededge2": "B6",
    "rededge3": "B7",
    "nir": "B8",
    "nir08": "B8A",
    "nir09": "B9",
    "cirrus": "B10",
    "swir16": "B11",
    "swir22": "B12",
}


def _assetBand(key: str) -> Optional[str]:
    return normalizeBandName(key) or COMMON_NAME_BANDS.get(key.strip().lower())


def _raiseForStatus(response: requests.Response):
    if response.status_code >= 400:
        raise HttpError(response.status_code, response.text or "")


def _decodeJson(response: requests.Response) -> dict:
    try:
        document = response.json()
    except ValueError as e:
        raise MalformedResponse(f"{response.url}: body is not JSON: {e}")
    if not isinstance(document, dict) or not isinstance(document.get("features"), list):
        raise MalformedResponse(f"{response.url}: expected a FeatureCollection with a 'features' list")
    return document


def _parseTimestamp(text: str) -> datetime:
    return datetime.fromisoformat(text.replace("Z", "+00:00"))


def itemToRecord(item: dict, baseUrl: str) -> SceneRecord:
    itemId = item.get("id", "<no id>") if isinstance(item, dict) else "<not an object>"
    try:
        properties = item["properties"]
        acquiredAt = _parseTimestamp(properties["datetime"])
        cloud = float(properties["eo:cloud_cover"])

        bandFiles = {}
        for key, asset in item.get("assets", {}).items():
            band = _assetBand(key)
            if band is not None and band not in bandFiles:
                bandFiles[band] = urljoin(baseUrl, asset["href"])

        if "proj:epsg" in properties and "proj:bbox" in properties:
            minX, minY, maxX, maxY = properties["proj:bbox"][:4]
            footprint = RegionOfInterest(minX = minX, minY = minY, maxX = maxX, maxY = maxY,
                                         crsCode = int(properties["proj:epsg"]))
        else:
            minX, minY, maxX, maxY = item["bbox"][:4]
            footprint = RegionOfInterest(minX = minX, minY = minY, maxX = maxX, maxY = maxY, crsCode = WGS84)

        return SceneRecord(str(item["id"]), acquiredAt, cloud, bandFiles, footprint)
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedResponse(f"STAC item {itemId}: {type(e).__name__}: {e}")


def _nextRequest(document: dict, body: dict):
    for link in document.get("links", []) or []:
        if not isinstance(link, dict) or link.get("rel") != "next" or "href" not in link:
            continue
        method = str(link.get("method", "GET")).upper()
        if method == "POST":
            nextBody = link.get("body", {})
            if link.get("merge", False):
                nextBody = {**body, **nextBody}
            return "POST", link["href"], nextBody
        return "GET", link["href"], None
    return None


def _searchInterval(session: requests.Session, searchUrl: str, body: dict, timeout: float) -> List[dict]:
    items = []
    method, url, payload = "POST", searchUrl, body
    seen = set()

    for _ in range(MAX_PAGES):
        key = (method, url, json.dumps(payload, sort_keys = True))
        if key in seen:
            raise MalformedResponse(f"pagination loops back to {url}")
        seen.add(key)

        try:
            if method == "POST":
                response = session.post(url, json = payload, timeout = timeout)
            else:
                response = session.get(url, timeout = timeout)
        except requests.RequestException as e:
            raise HttpError(None, f"{url}: {e}")

        _raiseForStatus(response)
        document = _decodeJson(response)
        items += [(f, response.url) for f in document["features"]]

        following = _nextRequest(document, payload or body)
        if following is None:
            return items
        method, url, payload = following
        url = urljoin(response.url, url)

    raise MalformedResponse(f"more than {MAX_PAGES} result pages from {searchUrl}")


def stacSearch(endpoint: str, spec: FilterSpec, bbox: Optional[List[float]] = None,
               session: Optional[requests.Session] = None, timeout: Optional[float] = None,
               collections: Optional[List[str]] = None, limit: int = PAGE_LIMIT) -> List[SceneRecord]:
    """
    STAC Item Search: one query per (window, year) datetime interval, each followed
    through its rel=next pages. Returns unique records sorted by (acquiredAt, sceneId).
    """
    session = session or requests.Session()
    timeout = timeout or settings.HTTP_TIMEOUT
    searchUrl = endpoint.rstrip("/") + "/search"

    if bbox is None and spec.roi is not None and spec.roi.crsCode == WGS84:
        bbox = [spec.roi.minX, spec.roi.minY, spec.roi.maxX, spec.roi.maxY]

    records: Dict[str, SceneRecord] = {}
    for year in spec.years:
        for window in spec.windows:
            body = {
                "datetime": window.interval(year),
                "query": {"eo:cloud_cover": {"lte": spec.maxCloudPct}},
                "limit": limit,
            }
            if bbox is not None:
                body["bbox"] = list(bbox)
            if collections:
                body["collections"] = list(collections)

            found = _searchInterval(session, searchUrl, body, timeout)
            logger.info(f"STAC {window.name} {year}: {len(found)} items")
            for item, baseUrl in found:
                record = itemToRecord(item, baseUrl)
                records.setdefault(record.sceneId, record)

    result = sorted(records.values(), key = lambda r: r.sortKey)
    logger.info(f"STAC search on {endpoint} found {len(result)} scenes ✓")
    return result


def _download(session: requests.Session, url: str, target: Path, timeout: float):
    partial = target.with_name(target.name + ".part")
    try:
        try:
            with session.get(url, stream = True, timeout = timeout) as response:
                _raiseForStatus(response)
                expected = response.headers.get("Content-Length")
                written = 0
                with open(partial, "wb") as f:
                    for chunk in response.iter_content(DOWNLOAD_CHUNK):
                        f.write(chunk)
                        written += len(chunk)
        except requests.RequestException as e:
            raise HttpError(None, f"{url}: {e}")

        if expected is not None and written != int(expected):
            raise HttpError(response.status_code, f"{url}: received {written} of {expected} bytes")
        os.replace(partial, target)
    finally:
        if partial.exists():
            partial.unlink()


def fetchAssets(record: SceneRecord, dest: str, session: Optional[requests.Session] = None,
                timeout: Optional[float] = None) -> SceneRecord:
    if record.isLocal:
        return record

    session = session or requests.Session()
    timeout = timeout or settings.HTTP_TIMEOUT
    sceneDir = Path(dest) / record.sceneId
    sceneDir.mkdir(parents = True, exist_ok = True)

    bandFiles = {}
    fetched: List[Path] = []
    try:
        for band, location in sorted(record.bandFiles.items()):
            if not isRemote(location):
                bandFiles[band] = location
                continue

            suffix = Path(urlparse(location).path).suffix or ".tif"
            target = sceneDir / f"{record.sceneId}_{band}{suffix}"
            _download(session, location, target, timeout)
            fetched.append(target)
            bandFiles[band] = str(target)
            logger.debug(f"Fetched {record.sceneId} {band} -> {target}")
    except Exception:
        # a record is fetched whole or not at all
        for target in fetched:
            target.unlink(missing_ok = True)
        logger.error(f"Fetching {record.sceneId} failed, removed {len(fetched)} completed assets")
        raise

    logger.info(f"Fetched {len(bandFiles)} assets for {record.sceneId}")
    return record.withBandFiles(bandFiles)


class StacSource(SceneSource):
    def __init__(self, endpoint: str, downloadDir: str, bbox: Optional[List[float]] = None,
                 workers: Optional[int] = None, session: Optional[requests.Session] = None):
        self._endpoint = endpoint
        self._downloadDir = downloadDir
        self._bbox = bbox
        self._workers = workers or settings.WORKERS
        self._session = session or requests.Session()

    @property
    def endpoint(self) -> str:
        return self._endpoint

    def loadCatalog(self, spec: FilterSpec) -> Catalog:
        records = stacSearch(self._endpoint, spec, bbox = self._bbox, session = self._session)
        # each download worker opens its own session
        with ThreadPoolExecutor(max_workers = max(1, self._workers)) as pool:
            fetched = list(pool.map(lambda r: fetchAssets(r, self._downloadDir), records))
        return Catalog(fetched)

    def getSourceName(self) -> str:
        return f"STAC {self._endpoint}"
