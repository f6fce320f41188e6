from datetime import datetime, timezone

import numpy as np
import pytest

from catalog.filtering import filterCatalog
from models.errors import ConfigError, CrsMismatch, EmptyInput, GridMismatch, MissingBand
from models.geo import RegionOfInterest
from models.sceneRecord import Catalog, FilterSpec
from services.compositor import loadScene, meanComposite, windowComposites
from services.rasterOps import placeOnLattice
from synthetic.sceneGenerator import PROTOCOL_WINDOWS

ROW = RegionOfInterest(minX = 0.0, minY = 90.0, maxX = 30.0, maxY = 100.0, crsCode = 32632)


def utc(*parts):
    return datetime(*parts, tzinfo = timezone.utc)


def f32(value):
    return float(np.float32(value))


# ====================================================================
# meanComposite

def test_mean_over_valid_observations(makeScene, tmp_path):
    a = makeScene(tmp_path, "a", utc(2015, 1, 5), {"B4": [[0.25, 0.5, 9.0]]}, mask = np.array([[True, True, False]]))
    b = makeScene(tmp_path, "b", utc(2015, 1, 12), {"B4": [[0.75, 9.0, 9.0]]}, mask = np.array([[True, False, False]]))

    stack = meanComposite([a, b], ["B4"], ROW, reflectanceScale = 1.0)

    np.testing.assert_array_equal(stack.grid.planes[0], [[0.5, 0.5, 0.0]])
    np.testing.assert_array_equal(stack.counts, [[2, 1, 0]])
    np.testing.assert_array_equal(stack.grid.mask, [[True, True, False]])


def test_pixel_needs_every_band_valid(makeScene, tmp_path):
    roi = RegionOfInterest(minX = 0.0, minY = 90.0, maxX = 20.0, maxY = 100.0, crsCode = 32632)
    a = makeScene(tmp_path, "a", utc(2015, 1, 5), {"B4": [[0.2, 0.4]], "B8": [[0.6, 0.8]]},
                  mask = {"B4": None, "B8": np.array([[False, True]])})
    b = makeScene(tmp_path, "b", utc(2015, 2, 5), {"B4": [[0.4, 0.6]], "B8": [[0.2, 0.4]]})

    stack = meanComposite([a, b], ["B4", "B8"], roi, reflectanceScale = 1.0)

    assert stack.grid.bandNames == ["B4", "B8"]
    np.testing.assert_array_equal(stack.counts, [[1, 2]])
    # pixel 0 comes from scene b alone
    assert stack.grid.band("B4")[0, 0] == f32(0.4)
    assert stack.grid.band("B8")[0, 0] == f32(0.2)
    assert stack.grid.band("B4")[0, 1] == pytest.approx((f32(0.4) + f32(0.6)) / 2, abs = 1e-12)
    assert stack.grid.band("B8")[0, 1] == pytest.approx((f32(0.8) + f32(0.4)) / 2, abs = 1e-12)


def test_coarse_band_lands_on_target_lattice(makeScene, tmp_path):
    roi = RegionOfInterest(minX = 0.0, minY = 60.0, maxX = 40.0, maxY = 100.0, crsCode = 32632)
    fine = makeScene(tmp_path, "fine", utc(2015, 1, 5), {"B4": np.full((4, 4), 0.25)})
    coarse = makeScene(tmp_path, "coarse", utc(2015, 1, 5), {"B11": np.full((2, 2), 0.5)}, resolution = 20.0)
    record = fine.withBandFiles({**fine.bandFiles, **coarse.bandFiles})

    stack = meanComposite([record], ["B4", "B11"], roi, reflectanceScale = 1.0)

    assert (stack.grid.width, stack.grid.height) == (4, 4)
    assert stack.grid.geo.pixelWidth == 10.0
    assert stack.grid.mask.all()
    np.testing.assert_allclose(stack.grid.band("B11"), 0.5, atol = 1e-12)


def test_scene_order_does_not_matter(sceneSet):
    records = list(sceneSet.catalog)[:5]
    forward = meanComposite(records, ["B4", "B8"], sceneSet.extent, workers = 1)
    shuffled = meanComposite(records[::-1][2:] + records[::-1][:2], ["B4", "B8"], sceneSet.extent, workers = 4)

    np.testing.assert_array_equal(forward.grid.planes, shuffled.grid.planes)
    np.testing.assert_array_equal(forward.counts, shuffled.counts)
    assert forward.sceneIds == shuffled.sceneIds == sorted(forward.sceneIds, key = lambda s: s[4:12])


def test_composite_errors(makeScene, tmp_path):
    a = makeScene(tmp_path, "a", utc(2015, 1, 5), {"B4": [[0.25, 0.5, 0.1]]})

    with pytest.raises(EmptyInput):
        meanComposite([], ["B4"], ROW)
    with pytest.raises(EmptyInput):
        meanComposite([a], [], ROW)
    with pytest.raises(MissingBand) as info:
        meanComposite([a], ["B4", "B12"], ROW)
    assert info.value.band == "B12" and info.value.sceneId == "a"

    geographic = RegionOfInterest(minX = 0.0, minY = 0.0, maxX = 1.0, maxY = 1.0, crsCode = 4326)
    with pytest.raises(CrsMismatch):
        meanComposite([a], ["B4"], geographic)


def test_partial_coverage_leaves_uncovered_pixels_invalid(makeScene, tmp_path):
    roi = RegionOfInterest(minX = 0.0, minY = 90.0, maxX = 60.0, maxY = 100.0, crsCode = 32632)
    west = makeScene(tmp_path, "a", utc(2015, 1, 5), {"B4": [[0.1, 0.2, 0.3, 0.4]]})
    east = makeScene(tmp_path, "b", utc(2015, 1, 12), {"B4": [[0.5, 0.6, 0.7, 0.8]]}, origin = (20.0, 100.0))
    # footprint shares the ROI edge at x = 60 but holds no pixel centre inside it
    touching = makeScene(tmp_path, "c", utc(2015, 1, 19), {"B4": [[0.9, 0.9]]}, origin = (60.0, 100.0))
    spec = FilterSpec(windows = PROTOCOL_WINDOWS, yearStart = 2015, yearEnd = 2015, roi = roi)
    kept = filterCatalog(Catalog([west, east]), spec)
    assert [r.sceneId for r in kept] == ["a", "b"]

    stack = meanComposite(list(kept) + [touching], ["B4"], roi, reflectanceScale = 1.0)

    assert (stack.grid.width, stack.grid.height) == (6, 1)
    assert (stack.grid.geo.originX, stack.grid.geo.originY) == (0.0, 100.0)
    np.testing.assert_array_equal(stack.counts, [[1, 1, 2, 2, 1, 1]])
    expected = [f32(0.1), f32(0.2), (f32(0.3) + f32(0.5)) / 2, (f32(0.4) + f32(0.6)) / 2, f32(0.7), f32(0.8)]
    np.testing.assert_allclose(stack.grid.planes[0, 0], expected, rtol = 0, atol = 1e-12)
    assert stack.sceneIds == ["a", "b"]

    # on its own a partial scene still yields the whole ROI lattice
    alone = meanComposite([east], ["B4"], roi, reflectanceScale = 1.0)
    assert (alone.grid.width, alone.grid.geo.originX) == (6, 0.0)
    np.testing.assert_array_equal(alone.grid.mask, [[False, False, True, True, True, True]])
    np.testing.assert_array_equal(alone.counts, [[0, 0, 1, 1, 1, 1]])

    with pytest.raises(EmptyInput):
        meanComposite([touching], ["B4"], roi, reflectanceScale = 1.0)


def test_place_on_lattice(makeGrid):
    grid = makeGrid([[1.0, 2.0]], origin = (10.0, 100.0))
    lattice = makeGrid(np.zeros((2, 4))).geo

    placed = placeOnLattice(grid, lattice, 4, 2)
    np.testing.assert_array_equal(placed.planes[0], [[0.0, 1.0, 2.0, 0.0], [0.0, 0.0, 0.0, 0.0]])
    np.testing.assert_array_equal(placed.mask, [[False, True, True, False], [False, False, False, False]])

    with pytest.raises(GridMismatch):
        placeOnLattice(makeGrid([[1.0]], origin = (15.0, 100.0)), lattice, 4, 2)
    with pytest.raises(GridMismatch):
        placeOnLattice(makeGrid([[1.0]], resolution = 20.0), lattice, 4, 2)


def test_composite_lies_between_scene_extremes(sceneSet):
    records = list(sceneSet.catalog)
    bands = ["B2", "B8", "B12"]
    stack = meanComposite(records, bands, sceneSet.extent, workers = 3)

    scenes = [loadScene(r, bands, sceneSet.extent) for r in records]
    planes = np.stack([s.planes for s in scenes])
    masks = np.stack([s.mask for s in scenes])[:, np.newaxis]
    lowest = np.where(masks, planes, np.inf).min(axis = 0)
    highest = np.where(masks, planes, -np.inf).max(axis = 0)

    valid = stack.grid.mask[np.newaxis]
    assert valid.any()
    assert np.all(~valid | (stack.grid.planes >= lowest - 1e-12))
    assert np.all(~valid | (stack.grid.planes <= highest + 1e-12))


# ====================================================================
# windowComposites

@pytest.fixture
def sceneSpec(sceneSet, protocolSpec):
    return protocolSpec.model_copy(update = {"roi": sceneSet.extent})


def test_pooled_equals_count_weighted_per_year_mean(sceneSet, sceneSpec):
    result = windowComposites(sceneSet.catalog, sceneSpec, ["B4", "B8"], mode = "both")
    assert not result.emptyBuckets

    for window in ("jan-mar", "oct-dec"):
        pooled = result.composites[(window, "2015-2020")]
        yearly = [result.composites[(window, str(year))] for year in range(2015, 2021)]

        counts = sum(s.counts for s in yearly)
        np.testing.assert_array_equal(pooled.counts, counts)
        weighted = sum(s.grid.planes * s.counts for s in yearly)
        expected = np.divide(weighted, counts, out = np.zeros_like(weighted), where = counts > 0)
        np.testing.assert_allclose(pooled.grid.planes, expected, rtol = 0, atol = 1e-12)


def test_pooled_bucket_keys_and_provenance(sceneSet, sceneSpec):
    result = windowComposites(sceneSet.catalog, sceneSpec, ["B4"])

    assert set(result.composites) == {("jan-mar", "2015-2020"), ("oct-dec", "2015-2020")}
    stack = result.composites[("jan-mar", "2015-2020")]
    assert len(stack.sceneIds) == 6
    assert all(s[8:10] in ("01", "02", "03") for s in stack.sceneIds)

    provenance = stack.provenance
    assert provenance["window"] == "jan-mar"
    assert provenance["period"] == "2015-2020"
    assert provenance["bands"] == ["B4"]
    assert provenance["reduction"] == "mean"
    assert provenance["filterSpec"]["maxCloudPct"] == 20.0


def test_empty_buckets_are_reported(makeScene, tmp_path):
    only = makeScene(tmp_path, "only", utc(2015, 2, 1), {"B4": [[0.25, 0.5, 0.1]]})
    spec = FilterSpec(windows = PROTOCOL_WINDOWS, yearStart = 2015, yearEnd = 2016, roi = ROW)

    result = windowComposites(Catalog([only]), spec, ["B4"], mode = "per-year", reflectanceScale = 1.0)

    assert set(result.composites) == {("jan-mar", "2015")}
    assert set(result.emptyBuckets) == {("jan-mar", "2016"), ("oct-dec", "2015"), ("oct-dec", "2016")}
    assert result.emptyBuckets[("oct-dec", "2016")].window == "oct-dec"


def test_window_composites_needs_roi_and_valid_mode(sceneSet, protocolSpec):
    with pytest.raises(ConfigError) as info:
        windowComposites(sceneSet.catalog, protocolSpec, ["B4"])
    assert info.value.field == "roi"

    with pytest.raises(ValueError):
        windowComposites(sceneSet.catalog, protocolSpec.model_copy(update = {"roi": sceneSet.extent}),
                         ["B4"], mode = "monthly")
