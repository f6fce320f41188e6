import logging
import math
import struct
import zlib
from typing import List, Optional, Tuple
from xml.sax.saxutils import escape

import numpy as np

from geotiff import tiffTags as T
from models.rasterGrid import RasterGrid

logger = logging.getLogger(__name__)

SAMPLE_FORMATS = ("float32", "uint16")
# Level-1C convention: reflectance stored as integer x 10000
UINT16_REFLECTANCE_SCALE = 10000.0

_TARGET_STRIP_BYTES = 65536


class GeoTiffWriter:
    """
    Encoder for multi-band GeoTIFF.

    Defaults produce little-endian, deflate-compressed, band-sequential strips. The other
    options exist so every configuration the reader accepts can be produced and round-tripped.
    """

    def __init__(self, sampleFormat: str = "float32", byteOrder: str = "little",
                 layout: str = "strips", compression: str = "deflate", planarConfig: str = "separate",
                 tileSize: int = 256, scale: Optional[float] = None):
        if sampleFormat not in SAMPLE_FORMATS:
            raise ValueError(f"sampleFormat must be one of {SAMPLE_FORMATS}, got '{sampleFormat}'")
        if byteOrder not in ("little", "big"):
            raise ValueError(f"byteOrder must be 'little' or 'big', got '{byteOrder}'")
        if layout not in ("strips", "tiles"):
            raise ValueError(f"layout must be 'strips' or 'tiles', got '{layout}'")
        if compression not in ("none", "deflate"):
            raise ValueError(f"compression must be 'none' or 'deflate', got '{compression}'")
        if planarConfig not in ("separate", "contig"):
            raise ValueError(f"planarConfig must be 'separate' or 'contig', got '{planarConfig}'")
        if tileSize < 16 or tileSize % 16:
            raise ValueError(f"tileSize must be a positive multiple of 16, got {tileSize}")

        self._sampleFormat = sampleFormat
        self._endian = "<" if byteOrder == "little" else ">"
        self._layout = layout
        self._compression = compression
        self._separate = planarConfig == "separate"
        self._tileSize = tileSize
        if scale is None:
            scale = UINT16_REFLECTANCE_SCALE if sampleFormat == "uint16" else 1.0
        self._scale = scale

    @property
    def sampleFormat(self) -> str:
        return self._sampleFormat

    @property
    def nodataText(self) -> str:
        return "nan" if self._sampleFormat == "float32" else "0"

    def encode(self, grid: RasterGrid) -> bytes:
        samples = self._toSamples(grid)
        blocks, blockInfo = self._encodeBlocks(samples)

        entries = self._tagEntries(grid, blockInfo)
        return self._assemble(blocks, entries)

    def write(self, grid: RasterGrid, path: str):
        data = self.encode(grid)
        with open(path, "wb") as f:
            f.write(data)
        logger.debug(f"Wrote {path}: {grid.width}x{grid.height}x{grid.bandCount} {self._sampleFormat}")

    # ------------------------------------------------------------- samples

    def _toSamples(self, grid: RasterGrid) -> np.ndarray:
        invalid = ~grid.mask[np.newaxis, :, :]
        if self._sampleFormat == "float32":
            values = (grid.planes * self._scale).astype(np.float32)
            values[np.broadcast_to(invalid, values.shape)] = np.nan
            dtype = np.dtype(self._endian + "f4")
        else:
            scaled = np.clip(grid.planes * self._scale, 0.0, 65535.0)
            values = np.floor(scaled + 0.5).astype(np.uint16)
            values[np.broadcast_to(invalid, values.shape)] = 0
            dtype = np.dtype(self._endian + "u2")

        return values.astype(dtype)

    def _compress(self, raw: bytes) -> bytes:
        if self._compression == "deflate":
            return zlib.compress(raw, 6)
        return raw

    def _encodeBlocks(self, samples: np.ndarray) -> Tuple[List[bytes], dict]:
        nBands, height, width = samples.shape
        planes = [samples[b:b + 1] for b in range(nBands)] if self._separate else [samples]
        blocks = []

        if self._layout == "strips":
            perPixel = 1 if self._separate else nBands
            rowBytes = width * perPixel * samples.dtype.itemsize
            rowsPerStrip = max(1, min(height, _TARGET_STRIP_BYTES // rowBytes))
            for plane in planes:
                for row0 in range(0, height, rowsPerStrip):
                    strip = plane[:, row0:row0 + rowsPerStrip].transpose(1, 2, 0)
                    blocks.append(self._compress(np.ascontiguousarray(strip).tobytes()))
            return blocks, {"rowsPerStrip": rowsPerStrip}

        size = self._tileSize
        across, down = math.ceil(width / size), math.ceil(height / size)
        for plane in planes:
            for t in range(across * down):
                tileRow, tileCol = divmod(t, across)
                tile = np.zeros((plane.shape[0], size, size), dtype = samples.dtype)
                piece = plane[:, tileRow * size:(tileRow + 1) * size, tileCol * size:(tileCol + 1) * size]
                tile[:, :piece.shape[1], :piece.shape[2]] = piece
                blocks.append(self._compress(np.ascontiguousarray(tile.transpose(1, 2, 0)).tobytes()))
        return blocks, {"tileSize": size}

    # ---------------------------------------------------------------- tags

    def _tagEntries(self, grid: RasterGrid, blockInfo: dict) -> List[tuple]:
        nBands = grid.bandCount
        bits = 32 if self._sampleFormat == "float32" else 16
        sampleFormat = T.SAMPLE_FORMAT_FLOAT if self._sampleFormat == "float32" else T.SAMPLE_FORMAT_UINT
        compression = T.COMPRESSION_DEFLATE[0] if self._compression == "deflate" else T.COMPRESSION_NONE
        geo = grid.geo

        # offsets and byte counts are patched in by _assemble
        entries = [
            (T.IMAGE_WIDTH, T.TYPE_LONG, [grid.width]),
            (T.IMAGE_LENGTH, T.TYPE_LONG, [grid.height]),
            (T.BITS_PER_SAMPLE, T.TYPE_SHORT, [bits] * nBands),
            (T.COMPRESSION, T.TYPE_SHORT, [compression]),
            (T.PHOTOMETRIC, T.TYPE_SHORT, [1]),
            (T.SAMPLES_PER_PIXEL, T.TYPE_SHORT, [nBands]),
            (T.PLANAR_CONFIG, T.TYPE_SHORT, [T.PLANAR_SEPARATE if self._separate else T.PLANAR_CONTIG]),
            (T.SAMPLE_FORMAT, T.TYPE_SHORT, [sampleFormat] * nBands),
            (T.MODEL_PIXEL_SCALE, T.TYPE_DOUBLE, [geo.pixelWidth, geo.pixelHeight, 0.0]),
            (T.MODEL_TIEPOINT, T.TYPE_DOUBLE, [0.0, 0.0, 0.0, geo.originX, geo.originY, 0.0]),
            (T.GEO_KEY_DIRECTORY, T.TYPE_SHORT, self._geoKeys(geo.crsCode)),
            (T.GDAL_METADATA, T.TYPE_ASCII, self._metadataXml(grid)),
            (T.GDAL_NODATA, T.TYPE_ASCII, self.nodataText),
        ]
        if nBands > 1:
            entries.append((T.EXTRA_SAMPLES, T.TYPE_SHORT, [0] * (nBands - 1)))

        if self._layout == "strips":
            entries += [
                (T.ROWS_PER_STRIP, T.TYPE_LONG, [blockInfo["rowsPerStrip"]]),
                (T.STRIP_OFFSETS, T.TYPE_LONG, "offsets"),
                (T.STRIP_BYTE_COUNTS, T.TYPE_LONG, "counts"),
            ]
        else:
            entries += [
                (T.TILE_WIDTH, T.TYPE_LONG, [blockInfo["tileSize"]]),
                (T.TILE_LENGTH, T.TYPE_LONG, [blockInfo["tileSize"]]),
                (T.TILE_OFFSETS, T.TYPE_LONG, "offsets"),
                (T.TILE_BYTE_COUNTS, T.TYPE_LONG, "counts"),
            ]

        return sorted(entries, key = lambda e: e[0])

    @staticmethod
    def _geoKeys(epsg: int) -> List[int]:
        if T.isGeographic(epsg):
            modelType, crsKey = T.MODEL_TYPE_GEOGRAPHIC, T.GEOGRAPHIC_TYPE_KEY
        else:
            modelType, crsKey = T.MODEL_TYPE_PROJECTED, T.PROJECTED_CS_TYPE_KEY

        return [1, 1, 0, 3,
                T.GT_MODEL_TYPE_KEY, 0, 1, modelType,
                T.GT_RASTER_TYPE_KEY, 0, 1, T.RASTER_PIXEL_IS_AREA,
                crsKey, 0, 1, epsg]

    @staticmethod
    def _metadataXml(grid: RasterGrid) -> str:
        items = "".join(
            f'  <Item name="DESCRIPTION" sample="{i}" role="description">{escape(name)}</Item>\n'
            for i, name in enumerate(grid.bandNames)
        )
        return f"<GDALMetadata>\n{items}</GDALMetadata>\n"

    def _packValues(self, fieldType: int, values) -> Tuple[int, bytes]:
        if fieldType == T.TYPE_ASCII:
            raw = values.encode("ascii", errors = "replace") + b"\x00"
            return len(raw), raw

        fmt = T.FIELD_TYPES[fieldType][0]
        return len(values), struct.pack(self._endian + fmt * len(values), *values)

    # ------------------------------------------------------------ assembly

    def _assemble(self, blocks: List[bytes], entries: List[tuple]) -> bytes:
        # header, then pixel blocks, then the IFD, then out-of-line tag values
        offsets, counts = [], []
        position = 8
        for block in blocks:
            offsets.append(position)
            counts.append(len(block))
            position += len(block)

        resolved = []
        for tag, fieldType, values in entries:
            if values == "offsets":
                values = offsets
            elif values == "counts":
                values = counts
            resolved.append((tag, fieldType) + self._packValues(fieldType, values))

        ifdOffset = position + (position % 2)
        valuesOffset = ifdOffset + 2 + 12 * len(resolved) + 4

        ifd = bytearray(struct.pack(self._endian + "H", len(resolved)))
        tail = bytearray()
        for tag, fieldType, count, raw in resolved:
            if len(raw) <= 4:
                inline = raw + b"\x00" * (4 - len(raw))
            else:
                if (valuesOffset + len(tail)) % 2:
                    tail += b"\x00"
                inline = struct.pack(self._endian + "I", valuesOffset + len(tail))
                tail += raw
            ifd += struct.pack(self._endian + "HHI", tag, fieldType, count) + inline
        ifd += struct.pack(self._endian + "I", 0)

        header = (b"II" if self._endian == "<" else b"MM") + struct.pack(self._endian + "HI", 42, ifdOffset)
        padding = b"\x00" * (ifdOffset - position)
        return header + b"".join(blocks) + padding + bytes(ifd) + bytes(tail)


def writeGeoTiff(grid: RasterGrid, path: str, sampleFormat: str = "float32", scale: Optional[float] = None):
    GeoTiffWriter(sampleFormat = sampleFormat, scale = scale).write(grid, path)
