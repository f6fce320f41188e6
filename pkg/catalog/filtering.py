import logging
from typing import Optional, Tuple

from models.sceneRecord import Catalog, FilterSpec, SceneRecord

logger = logging.getLogger(__name__)


def assignBucket(record: SceneRecord, spec: FilterSpec) -> Optional[Tuple[str, int]]:
    """(window name, year) the record's acquisition falls in, or None. Window bounds are inclusive, UTC."""
    year = record.acquiredAt.year
    if not spec.yearStart <= year <= spec.yearEnd:
        return None

    for window in spec.windows:
        if window.contains(record.acquiredAt):
            return window.name, year
    return None


def _footprintAccepted(record: SceneRecord, spec: FilterSpec) -> bool:
    if spec.roi is None:
        return True
    if record.footprint.crsCode != spec.roi.crsCode:
        # no reprojection: footprints in another CRS are not tested
        logger.debug(f"{record.sceneId}: footprint EPSG:{record.footprint.crsCode} differs from ROI "
                     f"EPSG:{spec.roi.crsCode}, skipping intersection test")
        return True
    return record.footprint.intersects(spec.roi)


def acceptsRecord(record: SceneRecord, spec: FilterSpec) -> bool:
    return (assignBucket(record, spec) is not None
            and record.cloudCoverPct <= spec.maxCloudPct
            and _footprintAccepted(record, spec))


def filterCatalog(catalog: Catalog, spec: FilterSpec) -> Catalog:
    kept = Catalog(r for r in catalog if acceptsRecord(r, spec))
    logger.info(f"Filtered catalog: {len(kept)} of {len(catalog)} scenes kept "
                f"({len(spec.windows)} windows, {spec.yearStart}-{spec.yearEnd}, cloud <= {spec.maxCloudPct}%)")
    return kept
