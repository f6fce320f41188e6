from typing import Dict, Optional, Tuple

from pydantic import BaseModel, Field

# Baseline TIFF 6.0 tags
IMAGE_WIDTH = 256
IMAGE_LENGTH = 257
BITS_PER_SAMPLE = 258
COMPRESSION = 259
PHOTOMETRIC = 262
IMAGE_DESCRIPTION = 270
STRIP_OFFSETS = 273
SAMPLES_PER_PIXEL = 277
ROWS_PER_STRIP = 278
STRIP_BYTE_COUNTS = 279
PLANAR_CONFIG = 284
PREDICTOR = 317
TILE_WIDTH = 322
TILE_LENGTH = 323
TILE_OFFSETS = 324
TILE_BYTE_COUNTS = 325
EXTRA_SAMPLES = 338
SAMPLE_FORMAT = 339

# GeoTIFF 1.1
MODEL_PIXEL_SCALE = 33550
MODEL_TIEPOINT = 33922
MODEL_TRANSFORMATION = 34264
GEO_KEY_DIRECTORY = 34735

# GDAL private tags
GDAL_METADATA = 42112
GDAL_NODATA = 42113

# GeoKeys
GT_MODEL_TYPE_KEY = 1024
GT_RASTER_TYPE_KEY = 1025
GEOGRAPHIC_TYPE_KEY = 2048
PROJECTED_CS_TYPE_KEY = 3072

MODEL_TYPE_PROJECTED = 1
MODEL_TYPE_GEOGRAPHIC = 2
RASTER_PIXEL_IS_AREA = 1

COMPRESSION_NONE = 1
COMPRESSION_DEFLATE = (8, 32946)
PLANAR_CONTIG = 1
PLANAR_SEPARATE = 2
SAMPLE_FORMAT_UINT = 1
SAMPLE_FORMAT_FLOAT = 3

# Field type code -> (struct character, byte size)
FIELD_TYPES: Dict[int, Tuple[str, int]] = {
    1: ("B", 1),     # BYTE
    2: ("s", 1),     # ASCII
    3: ("H", 2),     # SHORT
    4: ("I", 4),     # LONG
    5: ("II", 8),    # RATIONAL
    6: ("b", 1),     # SBYTE
    7: ("B", 1),     # UNDEFINED
    8: ("h", 2),     # SSHORT
    9: ("i", 4),     # SLONG
    10: ("ii", 8),   # SRATIONAL
    11: ("f", 4),    # FLOAT
    12: ("d", 8),    # DOUBLE
    16: ("Q", 8),    # LONG8 (BigTIFF)
}
TYPE_ASCII = 2
TYPE_SHORT = 3
TYPE_LONG = 4
TYPE_DOUBLE = 12


class GeoTiffHeader(BaseModel):
    byteOrder: str = Field(..., description = "little | big")
    width: int = Field(..., ge = 1)
    height: int = Field(..., ge = 1)
    samplesPerPixel: int = Field(..., ge = 1)
    sampleFormat: str = Field(..., description = "unsigned-int | float")
    bitsPerSample: int
    layout: str = Field(..., description = "strips | tiles")
    compression: str = Field(..., description = "none | deflate")
    planarConfig: str = Field(..., description = "contig | separate")
    pixelScale: Tuple[float, float, float]
    tiepoint: Tuple[float, float, float, float, float, float]
    epsg: int
    nodata: Optional[str] = None

    @property
    def numpyDtype(self) -> str:
        prefix = "<" if self.byteOrder == "little" else ">"
        kind = "u" if self.sampleFormat == "unsigned-int" else "f"
        return f"{prefix}{kind}{self.bitsPerSample // 8}"


def isGeographic(epsg: int) -> bool:
    # EPSG geographic 2-D CRS codes live in 4000-4999
    return 4000 <= epsg < 5000
