from datetime import date, datetime, timezone
from typing import Dict, Iterable, Iterator, List, Optional, Tuple

import pandas as pd
from pydantic import BaseModel, Field, field_validator, model_validator

from models.bands import S2_BANDS
from models.geo import RegionOfInterest


def toUtc(moment: datetime) -> datetime:
    # naive timestamps are taken to be UTC already
    if moment.tzinfo is None:
        return moment.replace(tzinfo = timezone.utc)
    return moment.astimezone(timezone.utc)


def formatTimestamp(moment: datetime) -> str:
    return toUtc(moment).strftime("%Y-%m-%dT%H:%M:%SZ")


def isRemote(path: str) -> bool:
    return path.startswith("http://") or path.startswith("https://")


class SceneRecord:
    def __init__(self, sceneId: str, acquiredAt: datetime, cloudCoverPct: float,
                 bandFiles: Dict[str, str], footprint: RegionOfInterest):
        if not sceneId:
            raise ValueError("sceneId must not be empty")
        if not 0.0 <= cloudCoverPct <= 100.0:
            raise ValueError(f"cloudCoverPct must be in [0, 100], got {cloudCoverPct}")
        unknown = sorted(set(bandFiles) - set(S2_BANDS))
        if unknown:
            raise ValueError(f"unknown band names {unknown}")

        self._sceneId = sceneId
        self._acquiredAt = toUtc(acquiredAt)
        self._cloudCoverPct = float(cloudCoverPct)
        self._bandFiles = dict(bandFiles)
        self._footprint = footprint

    @property
    def sceneId(self) -> str:
        return self._sceneId

    @property
    def acquiredAt(self) -> datetime:
        return self._acquiredAt

    @property
    def cloudCoverPct(self) -> float:
        return self._cloudCoverPct

    @property
    def bandFiles(self) -> Dict[str, str]:
        return dict(self._bandFiles)

    @property
    def footprint(self) -> RegionOfInterest:
        return self._footprint

    @property
    def sortKey(self) -> Tuple[datetime, str]:
        return (self._acquiredAt, self._sceneId)

    @property
    def isLocal(self) -> bool:
        return not any(isRemote(p) for p in self._bandFiles.values())

    def withBandFiles(self, bandFiles: Dict[str, str]) -> "SceneRecord":
        return SceneRecord(self._sceneId, self._acquiredAt, self._cloudCoverPct, bandFiles, self._footprint)

    def toDict(self):
        # same layout as the on-disk sidecar
        return {
            'scene_id': self._sceneId,
            'acquired_at': formatTimestamp(self._acquiredAt),
            'cloud_cover_pct': self._cloudCoverPct,
            'footprint': {
                'min_x': self._footprint.minX,
                'min_y': self._footprint.minY,
                'max_x': self._footprint.maxX,
                'max_y': self._footprint.maxY,
                'epsg': self._footprint.crsCode,
            },
            'bands': dict(self._bandFiles),
        }

    def __eq__(self, other):
        return isinstance(other, SceneRecord) and self.toDict() == other.toDict()

    def __repr__(self):
        return f"SceneRecord({self._sceneId}, {formatTimestamp(self._acquiredAt)}, cloud={self._cloudCoverPct})"


class Catalog:
    """Immutable, ordered collection of scene records, sorted by (acquiredAt, sceneId)."""

    def __init__(self, records: Iterable[SceneRecord] = ()):
        self._records = tuple(sorted(records, key = lambda r: r.sortKey))

    @property
    def records(self) -> Tuple[SceneRecord, ...]:
        return self._records

    @property
    def sceneIds(self) -> List[str]:
        return [r.sceneId for r in self._records]

    def __len__(self):
        return len(self._records)

    def __iter__(self) -> Iterator[SceneRecord]:
        return iter(self._records)

    def __getitem__(self, index) -> SceneRecord:
        return self._records[index]

    def toDataFrame(self) -> pd.DataFrame:
        columns = ["sceneId", "acquiredAt", "cloudCoverPct", "bands", "epsg"]
        rows = [{
            "sceneId": r.sceneId,
            "acquiredAt": formatTimestamp(r.acquiredAt),
            "cloudCoverPct": r.cloudCoverPct,
            "bands": " ".join(sorted(r.bandFiles, key = list(S2_BANDS).index)),
            "epsg": r.footprint.crsCode,
        } for r in self._records]
        return pd.DataFrame(rows, columns = columns)

    def toDict(self):
        return {'count': len(self._records), 'scenes': [r.toDict() for r in self._records]}


# FILTER SPECS

def _parseMonthDay(text: str) -> Tuple[int, int]:
    try:
        month, day = (int(p) for p in text.split("-"))
        # leap year so 02-29 is accepted
        date(2000, month, day)
    except ValueError:
        raise ValueError(f"'{text}' is not a valid MM-DD month-day")
    return month, day


class WindowSpec(BaseModel):
    name: str = Field(..., min_length = 1, description = "Label used in bucket keys and output paths")
    start: str = Field(..., description = "Inclusive MM-DD start of the annual window")
    end: str = Field(..., description = "Inclusive MM-DD end of the annual window")

    @field_validator("start", "end")
    @classmethod
    def _checkMonthDay(cls, value: str) -> str:
        month, day = _parseMonthDay(value)
        return f"{month:02d}-{day:02d}"

    @model_validator(mode = "after")
    def _checkOrder(self):
        if _parseMonthDay(self.start) > _parseMonthDay(self.end):
            raise ValueError(f"window '{self.name}' starts after it ends")
        return self

    def contains(self, moment: datetime) -> bool:
        moment = toUtc(moment)
        return _parseMonthDay(self.start) <= (moment.month, moment.day) <= _parseMonthDay(self.end)

    def interval(self, year: int) -> str:
        """RFC 3339 datetime interval of this window in the given year."""
        return f"{year}-{self.start}T00:00:00Z/{year}-{self.end}T23:59:59Z"


class FilterSpec(BaseModel):
    windows: List[WindowSpec] = Field(..., min_length = 1)
    yearStart: int = Field(..., ge = 1900, le = 2200)
    yearEnd: int = Field(..., ge = 1900, le = 2200)
    maxCloudPct: float = Field(default = 20.0, ge = 0, le = 100)
    roi: Optional[RegionOfInterest] = Field(None, description = "Scenes whose footprint misses it are dropped")

    @model_validator(mode = "after")
    def _checkYears(self):
        if self.yearStart > self.yearEnd:
            raise ValueError("yearStart must not be after yearEnd")
        names = [w.name for w in self.windows]
        if len(set(names)) != len(names):
            raise ValueError("window names must be unique")
        return self

    @property
    def years(self) -> List[int]:
        return list(range(self.yearStart, self.yearEnd + 1))

    @property
    def pooledPeriod(self) -> str:
        return f"{self.yearStart}-{self.yearEnd}"

    def buckets(self) -> List[Tuple[str, int]]:
        return [(w.name, y) for w in self.windows for y in self.years]

    def toDict(self):
        return self.model_dump(mode = "json")
