from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from catalog.directorySource import ingestDirectory
from geotiff.geotiffReader import readGeoTiff
from models.geo import GeoTransform
from models.sceneRecord import FilterSpec
from services.compositor import loadScene, meanComposite
from synthetic.sceneGenerator import (PROTOCOL_WINDOWS, FeatureSpec, defaultFeatures, generateSceneSet,
                                      sceneTimestamps)

SMALL = dict(width = 16, height = 16, workers = 2)


def fileBytes(root) -> dict:
    root = Path(root)
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_same_seed_gives_identical_files(tmp_path):
    generateSceneSet(str(tmp_path / "a"), nScenes = 3, seed = 11, **SMALL)
    generateSceneSet(str(tmp_path / "b"), nScenes = 3, seed = 11, **SMALL)
    generateSceneSet(str(tmp_path / "c"), nScenes = 3, seed = 12, **SMALL)

    a, b, c = (fileBytes(tmp_path / name) for name in "abc")
    assert a == b
    assert a.keys() == c.keys() and a != c
    assert "truth_mask.png" in a


def test_scene_set_layout(sceneSet):
    assert len(sceneSet.catalog) == 12
    truth = np.asarray(Image.open(Path(sceneSet.outDir) / "truth_mask.png"))
    np.testing.assert_array_equal(truth == 255, sceneSet.truthMask)
    assert 0 < sceneSet.truthMask.sum() < sceneSet.truthMask.size

    record = sceneSet.catalog[0]
    assert set(record.bandFiles) == {"B2", "B3", "B4", "B8", "B11", "B12"}
    assert 0.0 <= record.cloudCoverPct <= 15.0
    assert record.footprint == sceneSet.extent

    fine, header = readGeoTiff(record.bandFiles["B4"])
    coarse, _ = readGeoTiff(record.bandFiles["B12"])
    assert header.sampleFormat == "unsigned-int"
    assert (fine.width, fine.height, fine.geo.pixelWidth) == (64, 64, 10.0)
    assert (coarse.width, coarse.height, coarse.geo.pixelWidth) == (32, 32, 20.0)
    assert coarse.geo.originX == fine.geo.originX and coarse.geo.originY == fine.geo.originY


def test_ingest_closure(sceneSet):
    catalog = ingestDirectory(sceneSet.outDir)
    for read, written in zip(catalog, sceneSet.catalog, strict = True):
        assert (read.sceneId, read.acquiredAt, read.cloudCoverPct) == (written.sceneId, written.acquiredAt, written.cloudCoverPct)
        assert read.footprint == written.footprint
        assert {b: Path(p).resolve() for b, p in read.bandFiles.items()} == \
               {b: Path(p).resolve() for b, p in written.bandFiles.items()}


def test_timestamps_cycle_through_buckets():
    spec = FilterSpec(windows = PROTOCOL_WINDOWS, yearStart = 2015, yearEnd = 2016)
    stamps = sceneTimestamps(6, spec)

    assert [(s.year, s.month, s.day) for s in stamps] == [
        (2015, 1, 4), (2015, 10, 4), (2016, 1, 4), (2016, 10, 4), (2015, 1, 11), (2015, 10, 11),
    ]
    assert all(s.tzinfo == timezone.utc for s in stamps)


def test_noise_free_scenes_are_identical(tmp_path):
    generated = generateSceneSet(str(tmp_path), nScenes = 4, noiseSd = 0.0, **SMALL)
    records = list(generated.catalog)
    bands = ["B4", "B8", "B11"]

    composite = meanComposite(records, bands, generated.extent)
    single = loadScene(records[2], bands, generated.extent)
    np.testing.assert_allclose(composite.grid.planes, single.planes, rtol = 0, atol = 1e-12)
    assert (composite.counts == 4).all()


def test_zero_contrast_feature_is_invisible(tmp_path):
    feature = defaultFeatures(16, 16)[0].model_copy(update = {"contrast": {}})
    generated = generateSceneSet(str(tmp_path), nScenes = 2, noiseSd = 0.0, features = [feature], **SMALL)

    grid = loadScene(generated.catalog[0], ["B8"], generated.extent)
    inside = grid.band("B8")[generated.truthMask]
    outside = grid.band("B8")[~generated.truthMask]
    assert inside.size and outside.size
    assert inside.mean() == outside.mean()


def test_planted_contrast_is_recovered(sceneSet):
    stack = meanComposite(list(sceneSet.catalog), ["B4", "B8"], sceneSet.extent)
    truth = sceneSet.truthMask

    for band, planted in (("B4", -0.02), ("B8", 0.02)):
        plane = stack.grid.band(band)
        inside, outside = plane[truth], plane[~truth]
        standardError = 0.05 / np.sqrt(12) * np.sqrt(1.0 / inside.size + 1.0 / outside.size)
        assert abs((inside.mean() - outside.mean()) - planted) < 3 * standardError


def test_feature_geometry():
    channel = defaultFeatures(8, 8, origin = (0.0, 80.0))[0]
    assert channel.kind == "palaeochannel"

    ring = FeatureSpec(kind = "moat-ring", contrast = {"B8": 0.1}, center = (40.0, 40.0),
                       innerRadius = 15.0, outerRadius = 25.0)
    earthwork = FeatureSpec(kind = "rectangular-earthwork", contrast = {"B11": -0.1},
                            bbox = (10.0, 10.0, 70.0, 70.0), width = 10.0)
    lattice = GeoTransform(originX = 0.0, originY = 80.0, pixelWidth = 10.0, pixelHeight = 10.0, crsCode = 32632)

    ringMask = ring.footprintMask(lattice, 8, 8)
    # pixel centre (45, 45) is ~7 m from the centre, (25, 45) ~16 m
    assert not ringMask[3, 4]
    assert ringMask[3, 2]

    earthworkMask = earthwork.footprintMask(lattice, 8, 8)
    # centre (15, 65) on the ditch, (45, 45) inside the enclosure, (75, 75) outside
    assert earthworkMask[1, 1]
    assert not earthworkMask[3, 4]
    assert not earthworkMask[0, 7]


@pytest.mark.parametrize("fields", [
    dict(kind = "palaeochannel", contrast = {"B8": 0.1}, points = [(0.0, 0.0)], width = 10.0),
    dict(kind = "palaeochannel", contrast = {"B8": float("inf")}, points = [(0.0, 0.0), (1.0, 1.0)], width = 10.0),
    dict(kind = "palaeochannel", contrast = {"B8": 0.1}, points = [(0.0, 0.0), (1.0, 1.0)], width = 0.0),
    dict(kind = "moat-ring", contrast = {}, center = (0.0, 0.0), innerRadius = 5.0, outerRadius = 5.0),
    dict(kind = "rectangular-earthwork", contrast = {}, bbox = (10.0, 0.0, 0.0, 10.0), width = 1.0),
    dict(kind = "henge", contrast = {}),
])
def test_feature_validation(fields):
    with pytest.raises(ValueError):
        FeatureSpec(**fields)


def test_generator_argument_checks(tmp_path):
    with pytest.raises(ValueError):
        generateSceneSet(str(tmp_path), nScenes = 0, **SMALL)
    with pytest.raises(ValueError):
        generateSceneSet(str(tmp_path), nScenes = 1, noiseSd = -0.1, **SMALL)
    with pytest.raises(ValueError):
        generateSceneSet(str(tmp_path), nScenes = 1, width = 15, height = 16)


def test_record_timestamps_are_utc(sceneSet):
    assert all(r.acquiredAt.tzinfo == timezone.utc for r in sceneSet.catalog)
    assert sceneSet.catalog[0].acquiredAt == datetime(2015, 1, 4, 10, 30, tzinfo = timezone.utc)
