import json
import logging
from typing import List, Literal, Optional

from pydantic import BaseModel, Field, ValidationError, ValidationInfo, field_validator, model_validator

from models.bands import PCA_DEFAULT_BANDS, S2_BANDS, TCT_BANDS, sortBandNames
from models.errors import ConfigError
from models.geo import RegionOfInterest
from models.sceneRecord import FilterSpec, WindowSpec
from utils.hashing import canonicalJson, sha256Text

logger = logging.getLogger(__name__)

PRODUCTS = ("rgb", "fswir", "bsi", "ndvi", "hsv", "tct", "pca")

# bands each product reads from the composite
PRODUCT_BANDS = {
    "rgb": ("B2", "B3", "B4"),
    "fswir": ("B4", "B8", "B12"),
    "bsi": ("B2", "B4", "B8", "B12"),
    "ndvi": ("B4", "B8"),
    "hsv": ("B2", "B3", "B4"),
    "tct": TCT_BANDS,
}

# excluded from the config hash: they change where and how fast, not what
UNHASHED_FIELDS = {"outputDir", "workers", "input.downloadDir"}


class StretchSettings(BaseModel):
    lowerPct: float = Field(default = 2.0, ge = 0, le = 100)
    upperPct: float = Field(default = 98.0, ge = 0, le = 100)
    approximate: bool = Field(default = False, description = "1024-bin histogram percentiles for large rasters")

    @field_validator("upperPct")
    @classmethod
    def _checkOrder(cls, value: float, info: ValidationInfo) -> float:
        lower = info.data.get("lowerPct")
        if lower is not None and not value > lower:
            raise ValueError(f"upperPct ({value}) must be greater than lowerPct ({lower})")
        return value


class InputSettings(BaseModel):
    directory: Optional[str] = Field(None, description = "Scene directory with *.scene.json sidecars")
    stacEndpoint: Optional[str] = Field(None, description = "STAC API root URL")
    downloadDir: Optional[str] = Field(None, description = "Where STAC assets are fetched to")
    bbox: Optional[List[float]] = Field(None, description = "WGS84 search bbox when the ROI is projected")

    @model_validator(mode = "after")
    def _checkSource(self):
        if (self.directory is None) == (self.stacEndpoint is None):
            raise ValueError("exactly one of directory or stacEndpoint must be set")
        return self


class PipelineConfig(BaseModel):
    roi: RegionOfInterest
    windows: List[WindowSpec] = Field(..., min_length = 1)
    yearStart: int = Field(..., ge = 1900, le = 2200)
    yearEnd: int = Field(..., ge = 1900, le = 2200)
    maxCloudPct: float = Field(default = 20.0, ge = 0, le = 100)
    bands: List[str] = Field(default_factory = lambda: list(TCT_BANDS), min_length = 1)
    products: List[Literal["rgb", "fswir", "bsi", "ndvi", "hsv", "tct", "pca"]] = Field(..., min_length = 1)
    pcaMode: Literal["correlation", "covariance"] = "correlation"
    pcaBands: List[str] = Field(default_factory = lambda: list(PCA_DEFAULT_BANDS), min_length = 2)
    stretch: StretchSettings = Field(default_factory = StretchSettings)
    compositeMode: Literal["pooled", "per-year", "both"] = "pooled"
    writeComposites: bool = Field(default = False, description = "Also write each composite GeoTIFF + provenance")
    reflectanceScale: float = Field(default = 1e-4, gt = 0)
    targetResolutionM: float = Field(default = 10.0, gt = 0)
    outputDir: str = "output"
    input: InputSettings
    workers: Optional[int] = Field(None, ge = 1)

    @field_validator("bands")
    @classmethod
    def _canonicalBands(cls, value: List[str]) -> List[str]:
        unknown = [b for b in value if b not in S2_BANDS]
        if unknown:
            raise ValueError(f"unknown band names {unknown}")
        return sortBandNames(value)

    @field_validator("products")
    @classmethod
    def _canonicalProducts(cls, value: List[str]) -> List[str]:
        return [p for p in PRODUCTS if p in set(value)]

    @model_validator(mode = "after")
    def _checkBands(self):
        if self.yearStart > self.yearEnd:
            raise ValueError("yearStart must not be after yearEnd")
        for product in self.products:
            needed = self.pcaBands if product == "pca" else PRODUCT_BANDS[product]
            missing = [b for b in needed if b not in self.bands]
            if missing:
                raise ValueError(f"product '{product}' needs bands {missing} in 'bands'")
        return self

    def filterSpec(self) -> FilterSpec:
        return FilterSpec(windows = self.windows, yearStart = self.yearStart, yearEnd = self.yearEnd,
                          maxCloudPct = self.maxCloudPct, roi = self.roi)

    def toDict(self):
        return self.model_dump(mode = "json")


def _fieldName(error: dict) -> str:
    return ".".join(str(p) for p in error["loc"]) or "<document>"


def parseConfig(document: dict, source: str = "<config>") -> PipelineConfig:
    try:
        return PipelineConfig.model_validate(document)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(_fieldName(first), f"{first['msg']} ({source})")


def loadConfig(path: str) -> PipelineConfig:
    try:
        with open(path, "r", encoding = "utf-8") as f:
            document = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError("<document>", f"{path} is not valid JSON: {e}")
    except OSError as e:
        raise ConfigError("--config", f"cannot read {path}: {e}")

    config = parseConfig(document, path)
    logger.info(f"Loaded config {path}: products {config.products}, {len(config.windows)} windows, "
                f"{config.yearStart}-{config.yearEnd}")
    return config


def saveConfig(config: PipelineConfig, path: str):
    with open(path, "w", encoding = "utf-8") as f:
        json.dump(config.toDict(), f, indent = 2)


def configHash(config: PipelineConfig) -> str:
    document = config.toDict()
    for field in UNHASHED_FIELDS:
        *parents, leaf = field.split(".")
        section = document
        for name in parents:
            section = section.get(name) or {}
        section.pop(leaf, None)
    # window order only changes the order buckets are listed in
    document["windows"] = sorted(document["windows"], key = lambda w: w["name"])
    return sha256Text(canonicalJson(document))
