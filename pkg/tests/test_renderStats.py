import numpy as np
import pandas as pd
import pytest
from PIL import Image

from models.errors import EmptyBand
from models.products import StretchParams
from services.decomposition import pca
from services.renderStats import (autoStretch, bandReport, histogram, percentileCut, render, stretchToBytes,
                                  unitStretch)

RAMP = np.arange(100.0).reshape(10, 10)


def resolved(lo, hi):
    return StretchParams(lowerValue = lo, upperValue = hi)


# ====================================================================
# percentiles

def test_ramp_percentiles():
    params = percentileCut(RAMP)
    assert params.lowerValue == pytest.approx(1.98, abs = 1e-12)
    assert params.upperValue == pytest.approx(97.02, abs = 1e-12)
    assert params.quantileMethod == "linear"

    full = percentileCut(RAMP, 0.0, 100.0)
    assert (full.lowerValue, full.upperValue) == (0.0, 99.0)


def test_constant_and_masked_bands():
    params = percentileCut(np.full((4, 4), 0.37))
    assert params.lowerValue == params.upperValue == 0.37

    mask = RAMP >= 50
    params = percentileCut(RAMP, 0.0, 100.0, mask = mask)
    assert (params.lowerValue, params.upperValue) == (50.0, 99.0)

    with pytest.raises(EmptyBand):
        percentileCut(RAMP, mask = np.zeros((10, 10), dtype = bool))


def test_percentile_cut_is_monotone():
    values = np.random.default_rng(0).gamma(2.0, 0.1, size = (50, 50))
    cuts = [(10, 90), (5, 95), (2, 98), (1, 99), (0, 100)]
    previous = None
    for lower, upper in cuts:
        params = percentileCut(values, lower, upper)
        if previous is not None:
            assert params.lowerValue <= previous.lowerValue
            assert params.upperValue >= previous.upperValue
        previous = params


def test_approximate_percentiles_within_one_bin():
    values = np.random.default_rng(1).normal(0.2, 0.05, size = (300, 300))
    binWidth = (values.max() - values.min()) / 1024
    exact = percentileCut(values)
    approx = percentileCut(values, approximate = True)

    assert abs(approx.lowerValue - exact.lowerValue) <= binWidth
    assert abs(approx.upperValue - exact.upperValue) <= binWidth


def test_stretch_params_validation():
    with pytest.raises(ValueError):
        StretchParams(lowerPct = 98.0, upperPct = 2.0)
    with pytest.raises(ValueError):
        StretchParams(lowerPct = -1.0)
    with pytest.raises(ValueError):
        resolved(5.0, 1.0)


# ====================================================================
# stretch + render

def test_stretch_to_bytes_hand_values():
    plane = np.array([[0.0, 2.5, 10.0, 12.0, -3.0, 5.0]])
    mask = np.array([[True, True, True, True, True, False]])
    out = stretchToBytes(plane, resolved(0.0, 10.0), mask)

    assert out.dtype == np.uint8
    assert out.tolist() == [[0, 64, 255, 255, 0, 0]]


def test_degenerate_stretch_is_black():
    out = stretchToBytes(np.full((3, 3), 4.0), resolved(4.0, 4.0))
    assert not out.any()
    with pytest.raises(ValueError):
        stretchToBytes(RAMP, StretchParams())


def test_stretch_is_monotone_and_affine_invariant():
    values = np.sort(np.random.default_rng(2).uniform(-1, 2, size = 500)).reshape(1, -1)
    params = resolved(-0.5, 1.5)
    out = stretchToBytes(values, params, workers = 2)
    assert np.all(np.diff(out[0].astype(int)) >= 0)

    shifted = stretchToBytes(values * 4.0 + 3.0, resolved(-0.5 * 4.0 + 3.0, 1.5 * 4.0 + 3.0))
    np.testing.assert_array_equal(out, shifted)


def test_render_gray_and_rgb(makeGrid):
    rng = np.random.default_rng(3)
    single = makeGrid(rng.random((20, 20)), names = ["BSI"])
    params = autoStretch(single)
    np.testing.assert_array_equal(render(single, params), stretchToBytes(single.planes[0], params[0], single.mask))

    triple = makeGrid(rng.random((3, 20, 20)), names = ["B12", "B8", "B4"])
    params = autoStretch(triple)
    image = render(triple, params)
    assert image.shape == (20, 20, 3) and image.dtype == np.uint8
    for i in range(3):
        np.testing.assert_array_equal(image[..., i], stretchToBytes(triple.planes[i], params[i], triple.mask))

    constant = makeGrid(np.stack([np.full((4, 4), v) for v in (0.1, 0.5, 0.9)]), names = ["H", "S", "V"])
    uniform = render(constant, unitStretch(3))
    assert (uniform == uniform[0, 0]).all()
    assert uniform[0, 0].tolist() == [26, 128, 230]


def test_render_rejects_two_bands_except_pca(makeGrid):
    rng = np.random.default_rng(4)
    pair = makeGrid(rng.random((2, 10, 10)), names = ["B4", "B8"])
    with pytest.raises(ValueError):
        render(pair, autoStretch(pair))

    result = pca(pair, bands = ["B4", "B8"])
    image = render(result, autoStretch(result))
    assert image.shape == (10, 10)

    four = pca(makeGrid(rng.random((4, 10, 10)), names = ["B2", "B3", "B4", "B8"]))
    assert render(four, autoStretch(four)).shape == (10, 10, 3)
    with pytest.raises(ValueError):
        render(four, autoStretch(four)[:2])


# ====================================================================
# histograms + reports

def test_ramp_histogram():
    result = histogram(RAMP, nbins = 10)
    assert result.counts.tolist() == [10] * 10
    assert result.binEdges[0] == 0.0 and result.binEdges[-1] == 99.0
    assert result.validTotal == 100


def test_histogram_edges_and_conservation():
    constant = histogram(np.full((5, 5), 2.0), nbins = 7)
    assert constant.counts.sum() == 25 and constant.counts.max() == 25

    # max lands in the last bin, values outside an explicit range in the edge bins
    values = np.array([[-5.0, 0.0, 0.5, 1.0, 7.0]])
    clipped = histogram(values, nbins = 4, valueRange = (0.0, 1.0))
    assert clipped.counts.tolist() == [2, 0, 1, 2]

    rng = np.random.default_rng(5)
    plane = rng.normal(size = (200, 150))
    mask = rng.random((200, 150)) > 0.3
    result = histogram(plane, nbins = 33, mask = mask, workers = 4)
    assert result.counts.sum() == result.validTotal == int(mask.sum())
    assert np.all(np.diff(result.binEdges) > 0)

    with pytest.raises(ValueError):
        histogram(plane, nbins = 0)
    with pytest.raises(ValueError):
        histogram(plane, valueRange = (1.0, 0.0))
    with pytest.raises(EmptyBand):
        histogram(plane, mask = np.zeros(plane.shape, dtype = bool))


def test_values_on_edges_land_in_the_row_that_shows_them():
    edges = histogram(np.array([[0.1, 0.73]]), nbins = 97).binEdges
    values = np.concatenate([edges, np.random.default_rng(8).uniform(0.1, 0.73, size = 500)])
    result = histogram(values.reshape(1, -1), nbins = 97, valueRange = (0.1, 0.73))

    np.testing.assert_array_equal(result.binEdges, edges)
    expected = [int(((values >= lo) & (values < hi)).sum()) for lo, hi in zip(edges[:-2], edges[1:-1])]
    expected.append(int(((values >= edges[-2]) & (values <= edges[-1])).sum()))
    assert result.counts.tolist() == expected


def test_bimodal_histogram_shows_the_gap():
    rng = np.random.default_rng(6)
    plane = np.where(rng.random((100, 100)) < 0.5, 0.1, 0.3) + rng.normal(0, 0.005, size = (100, 100))
    counts = histogram(plane, nbins = 20, valueRange = (0.0, 0.4)).counts

    assert counts[4] + counts[5] > 1000 and counts[14] + counts[15] > 1000
    assert counts[7:13].sum() == 0


def test_band_report(makeGrid, tmp_path):
    rng = np.random.default_rng(7)
    mask = rng.random((24, 24)) > 0.1
    result = pca(makeGrid(rng.random((4, 24, 24)), mask, names = ["B2", "B3", "B4", "B8"]))

    written = bandReport(result, str(tmp_path / "report"))

    assert [p.split("/")[-1] for p, _ in written] == ["01_PC1.png", "02_PC2.png", "03_PC3.png", "04_PC4.png"]
    for png, csv in written:
        assert Image.open(png).size == (24, 24)
        frame = pd.read_csv(csv)
        assert list(frame.columns) == ["lo", "hi", "count"]
        assert len(frame) == 256
        assert frame["count"].sum() == int(mask.sum())
