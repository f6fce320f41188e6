import logging
import math
import struct
import xml.etree.ElementTree as ET
import zlib
from typing import Dict, List, Tuple

import numpy as np
from pydantic import ValidationError

from geotiff import tiffTags as T
from geotiff.tiffTags import GeoTiffHeader
from models.errors import MalformedFile, RasterError, TiffError, UnsupportedFeature
from models.geo import GeoTransform
from models.rasterGrid import RasterGrid

logger = logging.getLogger(__name__)

# zlib cannot inflate beyond ~1032:1; anything larger is a lying header
_MAX_DEFLATE_RATIO = 1032


class GeoTiffReader:
    """
    Decoder for the GeoTIFF subset written by this project and by common GIS tools:
    classic TIFF, either byte order, strips or tiles, no/deflate compression, uint16 or
    float32 samples, contiguous or separate planar configuration.
    """

    def __init__(self, data: bytes, source: str = "<memory>"):
        self._data = data
        self._source = source
        self._endian = "<"
        self._tags: Dict[int, tuple] = {}

    @property
    def tags(self) -> Dict[int, tuple]:
        return self._tags

    def read(self) -> Tuple[RasterGrid, GeoTiffHeader]:
        try:
            return self._parse()
        except TiffError:
            raise
        except (struct.error, zlib.error, ValueError, TypeError, AttributeError, IndexError, KeyError,
                OverflowError, MemoryError, ValidationError, RasterError) as e:
            raise MalformedFile(f"{self._source}: {e}")

    # ----------------------------------------------------------------- IFD

    def _parse(self) -> Tuple[RasterGrid, GeoTiffHeader]:
        data = self._data
        if len(data) < 8:
            raise MalformedFile(f"{self._source}: file too short for a TIFF header")

        if data[:2] == b"II":
            self._endian = "<"
        elif data[:2] == b"MM":
            self._endian = ">"
        else:
            raise MalformedFile(f"{self._source}: missing TIFF byte-order mark")

        magic = self._unpack("H", 2)[0]
        if magic == 43:
            raise UnsupportedFeature("Version", "BigTIFF")
        if magic != 42:
            raise MalformedFile(f"{self._source}: bad TIFF magic {magic}")

        ifdOffset = self._unpack("I", 4)[0]
        self._tags = self._readIfd(ifdOffset)

        header = self._buildHeader()
        planes = self._decodePixels(header)
        geo = self._buildGeoTransform(header)
        mask = self._buildMask(planes, header)
        names = self._bandNames(header.samplesPerPixel)

        grid = RasterGrid.fromBandNames(planes.astype(np.float64), mask, geo, names)
        logger.debug(f"Read {self._source}: {grid}")
        return grid, header

    def _unpack(self, fmt: str, offset: int) -> tuple:
        size = struct.calcsize(self._endian + fmt)
        if offset < 0 or offset + size > len(self._data):
            raise MalformedFile(f"{self._source}: read of {size} bytes at {offset} past end of file")
        return struct.unpack_from(self._endian + fmt, self._data, offset)

    def _readIfd(self, offset: int) -> Dict[int, tuple]:
        entryCount = self._unpack("H", offset)[0]
        if offset + 2 + entryCount * 12 + 4 > len(self._data):
            raise MalformedFile(f"{self._source}: IFD at {offset} runs past end of file")

        tags = {}
        for i in range(entryCount):
            entryOffset = offset + 2 + i * 12
            tag, fieldType, count = self._unpack("HHI", entryOffset)
            if fieldType not in T.FIELD_TYPES:
                # unknown field types are skipped per TIFF 6.0
                continue

            fmt, itemSize = T.FIELD_TYPES[fieldType]
            size = count * itemSize
            if size > len(self._data):
                raise MalformedFile(f"{self._source}: tag {tag} declares {count} values")

            if size <= 4:
                valueOffset = entryOffset + 8
            else:
                valueOffset = self._unpack("I", entryOffset + 8)[0]
            if valueOffset + size > len(self._data):
                raise MalformedFile(f"{self._source}: tag {tag} values at {valueOffset} past end of file")

            raw = self._data[valueOffset:valueOffset + size]
            if fieldType == T.TYPE_ASCII:
                tags[tag] = (raw.split(b"\x00")[0].decode("latin-1"),)
            elif fieldType in (5, 10):
                pairs = struct.unpack(self._endian + fmt[0] * (2 * count), raw)
                tags[tag] = tuple(pairs[k] / pairs[k + 1] if pairs[k + 1] else math.nan
                                  for k in range(0, len(pairs), 2))
            else:
                tags[tag] = struct.unpack(self._endian + fmt * count, raw)

        return tags

    def _required(self, tag: int, name: str) -> tuple:
        values = self._tags.get(tag)
        if not values:
            raise MalformedFile(f"{self._source}: required tag {name} ({tag}) missing")
        return values

    def _uniform(self, tag: int, name: str, default: int, count: int) -> int:
        values = self._tags.get(tag, (default,))
        if len(values) not in (1, count) or len(set(values)) != 1:
            raise UnsupportedFeature(name, values)
        return int(values[0])

    # -------------------------------------------------------------- header

    def _buildHeader(self) -> GeoTiffHeader:
        width = int(self._required(T.IMAGE_WIDTH, "ImageWidth")[0])
        height = int(self._required(T.IMAGE_LENGTH, "ImageLength")[0])
        samples = int(self._tags.get(T.SAMPLES_PER_PIXEL, (1,))[0])
        if width < 1 or height < 1 or samples < 1:
            raise MalformedFile(f"{self._source}: empty image {width}x{height}x{samples}")

        bits = self._uniform(T.BITS_PER_SAMPLE, "BitsPerSample", 1, samples)
        sampleFormat = self._uniform(T.SAMPLE_FORMAT, "SampleFormat", T.SAMPLE_FORMAT_UINT, samples)
        if (sampleFormat, bits) == (T.SAMPLE_FORMAT_UINT, 16):
            formatName = "unsigned-int"
        elif (sampleFormat, bits) == (T.SAMPLE_FORMAT_FLOAT, 32):
            formatName = "float"
        elif bits not in (16, 32):
            raise UnsupportedFeature("BitsPerSample", bits)
        else:
            raise UnsupportedFeature("SampleFormat", f"{sampleFormat} at {bits} bits")

        compression = int(self._tags.get(T.COMPRESSION, (T.COMPRESSION_NONE,))[0])
        if compression == T.COMPRESSION_NONE:
            compressionName = "none"
        elif compression in T.COMPRESSION_DEFLATE:
            compressionName = "deflate"
        else:
            raise UnsupportedFeature("Compression", compression)

        predictor = int(self._tags.get(T.PREDICTOR, (1,))[0])
        if predictor != 1:
            raise UnsupportedFeature("Predictor", predictor)

        planar = int(self._tags.get(T.PLANAR_CONFIG, (T.PLANAR_CONTIG,))[0])
        if planar not in (T.PLANAR_CONTIG, T.PLANAR_SEPARATE):
            raise UnsupportedFeature("PlanarConfiguration", planar)

        layout = "tiles" if T.TILE_WIDTH in self._tags else "strips"

        totalBytes = width * height * samples * (bits // 8)
        limit = len(self._data) if compressionName == "none" else _MAX_DEFLATE_RATIO * len(self._data) + 65536
        if totalBytes > limit:
            raise MalformedFile(f"{self._source}: {width}x{height}x{samples} image cannot fit in {len(self._data)} bytes")

        if T.MODEL_PIXEL_SCALE not in self._tags or T.MODEL_TIEPOINT not in self._tags:
            if T.MODEL_TRANSFORMATION in self._tags:
                raise UnsupportedFeature("ModelTransformation", "affine matrix georeferencing")
            raise UnsupportedFeature("ModelPixelScale/ModelTiepoint", "missing")

        pixelScale = tuple(float(v) for v in self._tags[T.MODEL_PIXEL_SCALE][:3])
        tiepoint = tuple(float(v) for v in self._tags[T.MODEL_TIEPOINT][:6])
        if len(pixelScale) < 2 or len(tiepoint) < 6:
            raise MalformedFile(f"{self._source}: truncated georeferencing tags")
        if len(pixelScale) == 2:
            pixelScale = pixelScale + (0.0,)

        nodataText = self._tags.get(T.GDAL_NODATA, (None,))[0]
        return GeoTiffHeader(
            byteOrder = "little" if self._endian == "<" else "big",
            width = width,
            height = height,
            samplesPerPixel = samples,
            sampleFormat = formatName,
            bitsPerSample = bits,
            layout = layout,
            compression = compressionName,
            planarConfig = "contig" if planar == T.PLANAR_CONTIG else "separate",
            pixelScale = pixelScale,
            tiepoint = tiepoint,
            epsg = self._epsg(),
            nodata = nodataText.strip() if nodataText is not None else None,
        )

    def _epsg(self) -> int:
        keys = self._tags.get(T.GEO_KEY_DIRECTORY)
        if not keys or len(keys) < 4:
            raise UnsupportedFeature("GeoKeyDirectory", "missing")

        entries = {}
        keyCount = keys[3]
        for k in range(keyCount):
            base = 4 + k * 4
            if base + 3 >= len(keys):
                raise MalformedFile(f"{self._source}: GeoKeyDirectory shorter than its key count")
            keyId, location, _, value = keys[base:base + 4]
            if location == 0:
                entries[keyId] = value

        # 32767 marks a user-defined CRS
        for key in (T.PROJECTED_CS_TYPE_KEY, T.GEOGRAPHIC_TYPE_KEY):
            if key in entries and entries[key] not in (0, 32767):
                return int(entries[key])

        raise UnsupportedFeature("GeoKeyDirectory", "no EPSG code")

    # -------------------------------------------------------------- pixels

    def _chunk(self, offset: int, count: int, expected: int, compression: str) -> bytes:
        if offset < 0 or count < 0 or offset + count > len(self._data):
            raise MalformedFile(f"{self._source}: block at {offset}+{count} past end of file")

        raw = self._data[offset:offset + count]
        if compression == "deflate":
            try:
                inflater = zlib.decompressobj()
                raw = inflater.decompress(raw, expected)
            except zlib.error as e:
                raise MalformedFile(f"{self._source}: corrupt deflate block at {offset}: {e}")

        if len(raw) < expected:
            raise MalformedFile(f"{self._source}: block at {offset} holds {len(raw)} of {expected} bytes")
        return raw[:expected]

    def _blockTables(self, offsetsTag: int, countsTag: int, name: str, expected: int):
        offsets = self._required(offsetsTag, f"{name}Offsets")
        counts = self._required(countsTag, f"{name}ByteCounts")
        if len(offsets) != expected or len(counts) != expected:
            raise MalformedFile(f"{self._source}: expected {expected} {name.lower()}s, "
                                f"got {len(offsets)} offsets / {len(counts)} byte counts")
        return offsets, counts

    def _decodePixels(self, header: GeoTiffHeader) -> np.ndarray:
        dtype = np.dtype(header.numpyDtype)
        width, height, samples = header.width, header.height, header.samplesPerPixel
        separate = header.planarConfig == "separate"
        out = np.zeros((samples, height, width), dtype = dtype.newbyteorder("="))

        if header.layout == "strips":
            rowsPerStrip = int(self._tags.get(T.ROWS_PER_STRIP, (height,))[0])
            rowsPerStrip = min(max(rowsPerStrip, 1), height)
            stripsPerPlane = math.ceil(height / rowsPerStrip)
            planesStored = samples if separate else 1
            offsets, counts = self._blockTables(T.STRIP_OFFSETS, T.STRIP_BYTE_COUNTS, "Strip",
                                                stripsPerPlane * planesStored)

            for plane in range(planesStored):
                for s in range(stripsPerPlane):
                    index = plane * stripsPerPlane + s
                    row0 = s * rowsPerStrip
                    rows = min(rowsPerStrip, height - row0)
                    perPixel = 1 if separate else samples
                    expected = rows * width * perPixel * dtype.itemsize
                    raw = self._chunk(offsets[index], counts[index], expected, header.compression)
                    block = np.frombuffer(raw, dtype = dtype)
                    if separate:
                        out[plane, row0:row0 + rows] = block.reshape(rows, width)
                    else:
                        out[:, row0:row0 + rows] = block.reshape(rows, width, samples).transpose(2, 0, 1)
        else:
            tileWidth = int(self._required(T.TILE_WIDTH, "TileWidth")[0])
            tileLength = int(self._required(T.TILE_LENGTH, "TileLength")[0])
            if tileWidth < 1 or tileLength < 1:
                raise MalformedFile(f"{self._source}: empty tile size {tileWidth}x{tileLength}")
            across = math.ceil(width / tileWidth)
            down = math.ceil(height / tileLength)
            planesStored = samples if separate else 1
            offsets, counts = self._blockTables(T.TILE_OFFSETS, T.TILE_BYTE_COUNTS, "Tile",
                                                across * down * planesStored)

            perPixel = 1 if separate else samples
            expected = tileWidth * tileLength * perPixel * dtype.itemsize
            for plane in range(planesStored):
                for t in range(across * down):
                    index = plane * across * down + t
                    tileRow, tileCol = divmod(t, across)
                    row0, col0 = tileRow * tileLength, tileCol * tileWidth
                    rows = min(tileLength, height - row0)
                    cols = min(tileWidth, width - col0)
                    raw = self._chunk(offsets[index], counts[index], expected, header.compression)
                    block = np.frombuffer(raw, dtype = dtype).reshape(tileLength, tileWidth, perPixel)
                    block = block[:rows, :cols].transpose(2, 0, 1)
                    if separate:
                        out[plane, row0:row0 + rows, col0:col0 + cols] = block[0]
                    else:
                        out[:, row0:row0 + rows, col0:col0 + cols] = block

        return out

    # ---------------------------------------------------------- semantics

    def _buildGeoTransform(self, header: GeoTiffHeader) -> GeoTransform:
        scaleX, scaleY = header.pixelScale[0], header.pixelScale[1]
        i, j, _, x, y, _ = header.tiepoint
        if not (scaleX > 0 and scaleY > 0):
            raise UnsupportedFeature("ModelPixelScale", header.pixelScale)

        return GeoTransform(
            originX = x - i * scaleX,
            originY = y + j * scaleY,
            pixelWidth = scaleX,
            pixelHeight = scaleY,
            crsCode = header.epsg,
        )

    def _buildMask(self, planes: np.ndarray, header: GeoTiffHeader) -> np.ndarray:
        mask = np.ones(planes.shape[1:], dtype = bool)
        isFloat = header.sampleFormat == "float"
        if isFloat:
            mask &= ~np.isnan(planes).any(axis = 0)

        if header.nodata:
            try:
                nodata = float(header.nodata)
            except ValueError:
                raise MalformedFile(f"{self._source}: unparseable nodata value '{header.nodata}'")
            if not math.isnan(nodata):
                mask &= ~(planes == planes.dtype.type(nodata)).any(axis = 0)

        return mask

    def _bandNames(self, samples: int) -> List[str]:
        names = [f"band{i + 1}" for i in range(samples)]
        text = self._tags.get(T.GDAL_METADATA, (None,))[0]
        if not text:
            return names

        try:
            root = ET.fromstring(text)
        except ET.ParseError:
            logger.warning(f"{self._source}: ignoring unparseable GDAL metadata")
            return names

        for item in root.iter("Item"):
            if item.get("name") != "DESCRIPTION" or item.get("sample") is None:
                continue
            try:
                sample = int(item.get("sample"))
            except ValueError:
                continue
            if 0 <= sample < samples and item.text:
                names[sample] = item.text.strip()

        return names


def readGeoTiff(path: str) -> Tuple[RasterGrid, GeoTiffHeader]:
    with open(path, "rb") as f:
        data = f.read()

    return GeoTiffReader(data, source = str(path)).read()
