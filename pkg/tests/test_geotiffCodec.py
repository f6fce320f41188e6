import io
import itertools

import numpy as np
import pytest
import rasterio
from PIL import Image
from rasterio.transform import from_origin

from geotiff.geotiffReader import GeoTiffReader, readGeoTiff
from geotiff.geotiffWriter import GeoTiffWriter, writeGeoTiff
from geotiff.pngWriter import encodePng, writePng
from models.errors import MalformedFile, TiffError, UnsupportedFeature

CONFIGURATIONS = list(itertools.product(
    ["little", "big"], ["strips", "tiles"], ["none", "deflate"], ["separate", "contig"],
))


@pytest.fixture
def floatGrid(makeGrid):
    rng = np.random.default_rng(11)
    planes = rng.normal(0.2, 0.1, size = (3, 37, 53)).astype(np.float32).astype(np.float64)
    mask = rng.random((37, 53)) > 0.1
    return makeGrid(planes, mask, origin = (600000.0, 5000000.0), names = ["B4", "B3", "B2"])


@pytest.mark.parametrize("byteOrder,layout,compression,planar", CONFIGURATIONS)
def test_float32_round_trip_is_bit_exact(floatGrid, byteOrder, layout, compression, planar):
    writer = GeoTiffWriter(sampleFormat = "float32", byteOrder = byteOrder, layout = layout,
                           compression = compression, planarConfig = planar, tileSize = 16)
    grid, header = GeoTiffReader(writer.encode(floatGrid)).read()

    assert header.byteOrder == byteOrder
    assert header.layout == layout
    assert header.compression == compression
    assert header.planarConfig == planar
    assert grid.geo == floatGrid.geo
    assert grid.bandNames == ["B4", "B3", "B2"]
    np.testing.assert_array_equal(grid.mask, floatGrid.mask)
    np.testing.assert_array_equal(grid.planes, floatGrid.planes)


@pytest.mark.parametrize("byteOrder,layout,compression,planar", CONFIGURATIONS)
def test_uint16_round_trip(makeGrid, byteOrder, layout, compression, planar):
    counts = np.arange(1, 21 * 19 + 1, dtype = np.float64).reshape(19, 21)
    grid = makeGrid(counts, names = ["B8"])
    writer = GeoTiffWriter(sampleFormat = "uint16", byteOrder = byteOrder, layout = layout,
                           compression = compression, planarConfig = planar, tileSize = 16, scale = 1.0)
    out, header = GeoTiffReader(writer.encode(grid)).read()

    assert header.sampleFormat == "unsigned-int" and header.nodata == "0"
    np.testing.assert_array_equal(out.planes[0], counts)


def test_uint16_reflectance_scaling(makeGrid):
    grid = makeGrid([[0.4, 7.0, -0.2, 0.00004]], names = ["B4"])
    out, _ = GeoTiffReader(GeoTiffWriter(sampleFormat = "uint16").encode(grid)).read()

    assert out.planes[0, 0, 0] == 4000.0
    # clipped to the uint16 range
    assert out.planes[0, 0, 1] == 65535.0
    # 0 is nodata, so a non-positive reflectance comes back invalid
    assert not out.mask[0, 2]
    assert not out.mask[0, 3]


def test_geographic_crs_round_trip(makeGrid):
    grid = makeGrid(np.ones((2, 2)), origin = (9.0, 45.0), resolution = 0.001, crsCode = 4326)
    out, header = GeoTiffReader(GeoTiffWriter().encode(grid)).read()
    assert header.epsg == 4326
    assert out.geo == grid.geo


def test_rasterio_reads_our_files(floatGrid, tmp_path):
    path = tmp_path / "ours.tif"
    writeGeoTiff(floatGrid, str(path))

    with rasterio.open(path) as src:
        assert (src.width, src.height, src.count) == (53, 37, 3)
        assert src.crs.to_epsg() == 32632
        assert src.transform.c == 600000.0 and src.transform.f == 5000000.0
        assert src.transform.a == 10.0 and src.transform.e == -10.0
        assert list(src.descriptions) == ["B4", "B3", "B2"]
        data = src.read()

    expected = np.where(floatGrid.mask, floatGrid.planes, np.nan).astype(np.float32)
    np.testing.assert_array_equal(data, expected)


@pytest.mark.parametrize("options", [
    {},
    {"compress": "deflate"},
    {"tiled": True, "blockxsize": 16, "blockysize": 16},
    {"interleave": "band", "compress": "deflate", "tiled": True, "blockxsize": 32, "blockysize": 32},
])
def test_we_read_rasterio_files(tmp_path, options):
    rng = np.random.default_rng(5)
    data = rng.random((2, 40, 45)).astype(np.float32)
    path = tmp_path / "theirs.tif"
    profile = dict(driver = "GTiff", width = 45, height = 40, count = 2, dtype = "float32",
                   crs = "EPSG:32633", transform = from_origin(300000.0, 4500000.0, 20.0, 20.0), **options)
    with rasterio.open(path, "w", **profile) as dst:
        dst.write(data)

    grid, header = readGeoTiff(str(path))
    assert header.epsg == 32633
    assert (grid.geo.originX, grid.geo.originY, grid.geo.pixelWidth) == (300000.0, 4500000.0, 20.0)
    np.testing.assert_array_equal(grid.planes, data.astype(np.float64))


def test_float64_is_unsupported(tmp_path):
    path = tmp_path / "f64.tif"
    profile = dict(driver = "GTiff", width = 4, height = 4, count = 1, dtype = "float64",
                   crs = "EPSG:32632", transform = from_origin(0.0, 40.0, 10.0, 10.0))
    with rasterio.open(path, "w", **profile) as dst:
        dst.write(np.zeros((1, 4, 4)))

    with pytest.raises(UnsupportedFeature):
        readGeoTiff(str(path))


def test_not_a_tiff():
    with pytest.raises(MalformedFile):
        GeoTiffReader(b"GIF89a" + b"\x00" * 64).read()
    with pytest.raises(MalformedFile):
        GeoTiffReader(b"II").read()


def test_truncation_and_mutation_fuzz(makeGrid):
    rng = np.random.default_rng(2024)
    grid = makeGrid(rng.random((2, 24, 24)), names = ["B2", "B3"])
    seeds = [
        GeoTiffWriter(compression = "deflate").encode(grid),
        GeoTiffWriter(compression = "none", layout = "tiles", tileSize = 16, byteOrder = "big").encode(grid),
    ]

    for i in range(1000):
        data = bytearray(seeds[i % 2])
        if i % 3 == 0:
            data = data[:int(rng.integers(0, len(data)))]
        else:
            for _ in range(int(rng.integers(1, 9))):
                data[int(rng.integers(0, len(data)))] = int(rng.integers(0, 256))
        try:
            GeoTiffReader(bytes(data), source = f"mutation {i}").read()
        except TiffError:
            pass


# ====================================================================
# PNG

def test_png_gray_and_rgb_decode_with_pillow(tmp_path):
    rng = np.random.default_rng(1)
    gray = rng.integers(0, 256, size = (13, 17), dtype = np.uint8)
    rgb = rng.integers(0, 256, size = (9, 6, 3), dtype = np.uint8)

    image = Image.open(io.BytesIO(encodePng(gray)))
    assert image.mode == "L"
    np.testing.assert_array_equal(np.asarray(image), gray)

    path = tmp_path / "rgb.png"
    writePng(rgb, str(path))
    image = Image.open(path)
    assert image.mode == "RGB"
    np.testing.assert_array_equal(np.asarray(image), rgb)


def test_png_rejects_bad_input():
    with pytest.raises(ValueError):
        encodePng(np.zeros((4, 4), dtype = np.float32))
    with pytest.raises(ValueError):
        encodePng(np.zeros((4, 4, 2), dtype = np.uint8))
