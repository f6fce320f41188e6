import json
import logging
import os
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from geotiff.geotiffWriter import writeGeoTiff
from geotiff.pngWriter import writePng
from models.bands import PCA_DEFAULT_BANDS, describeBand
from models.products import QUANTILE_METHOD, CompositeStack, TctCoefficients
from models.rasterGrid import RasterGrid
from services.decomposition import pca, rgbToHsv, tct
from services.renderStats import (REPORT_BINS, Renderable, autoStretch, bandReport, histogram, render,
                                  stretchToUnit, unitStretch)
from services.spectralIndices import BSI_BANDS, bsi, compose, ndvi

logger = logging.getLogger(__name__)


class ProductOptions(BaseModel):
    lowerPct: float = 2.0
    upperPct: float = 98.0
    approximate: bool = False
    pcaMode: str = "correlation"
    pcaBands: List[str] = Field(default_factory = lambda: list(PCA_DEFAULT_BANDS))
    histogramBins: int = REPORT_BINS
    workers: Optional[int] = None


class ProductOutput:
    def __init__(self, name: str, grid: RasterGrid, image: np.ndarray, metadata: dict,
                 histogramGrid: Optional[RasterGrid] = None, reportSource: Optional[Renderable] = None):
        self.name = name
        self.grid = grid
        self.image = image
        self.metadata = metadata
        self.histogramGrid = histogramGrid
        self.reportSource = reportSource


def _stretchMetadata(params) -> dict:
    return {'stretch': [p.toDict() for p in params], 'quantileMethod': QUANTILE_METHOD}


def buildProduct(product: str, composite: RasterGrid, options: ProductOptions) -> ProductOutput:
    """Derive one named product from a composite grid and render it."""
    lo, hi, approximate, workers = options.lowerPct, options.upperPct, options.approximate, options.workers

    if product in ("rgb", "fswir"):
        triple = compose(composite, product.upper())
        params = autoStretch(triple, lo, hi, approximate)
        metadata = {'product': product, **triple.toDict(), **_stretchMetadata(params)}
        return ProductOutput(product, triple.grid, render(triple, params, workers), metadata,
                             reportSource = triple if product == "rgb" else None)

    if product in ("bsi", "ndvi"):
        index = bsi(composite) if product == "bsi" else ndvi(composite)
        params = autoStretch(index, lo, hi, approximate)
        metadata = {'product': product, **index.toDict(), **_stretchMetadata(params)}
        if product == "bsi":
            metadata['bandMapping'] = dict(BSI_BANDS)
        return ProductOutput(product, index.grid, render(index, params, workers), metadata,
                             histogramGrid = index.grid)

    if product == "hsv":
        triple = compose(composite, "RGB")
        inputParams = autoStretch(triple, lo, hi, approximate)
        unit = np.stack([stretchToUnit(triple.grid.planes[i], inputParams[i], triple.grid.mask) for i in range(3)])
        hsv = rgbToHsv(RasterGrid(unit, triple.grid.mask, triple.grid.geo, [describeBand(n) for n in "RGB"]))
        params = unitStretch(3)
        metadata = {'product': product, 'input': triple.toDict(),
                    'inputStretch': [p.toDict() for p in inputParams], **_stretchMetadata(params)}
        return ProductOutput(product, hsv.grid, render(hsv, params, workers), metadata)

    if product == "tct":
        coeffs = TctCoefficients()
        grid = tct(composite, coeffs)
        params = autoStretch(grid, lo, hi, approximate)
        metadata = {'product': product, 'coefficients': coeffs.toDict(), **_stretchMetadata(params)}
        return ProductOutput(product, grid, render(grid, params, workers), metadata)

    if product == "pca":
        result = pca(composite, options.pcaBands, options.pcaMode, workers)
        # PC1-PC2-PC3 as RGB, PC1 alone as gray for two components
        shown = result.scores.select(["PC1", "PC2", "PC3"] if result.componentCount >= 3 else ["PC1"])
        params = autoStretch(shown, lo, hi, approximate)
        metadata = {'product': product, **result.toReport(), **_stretchMetadata(params)}
        return ProductOutput(product, result.scores, render(shown, params, workers), metadata,
                             reportSource = result)

    raise ValueError(f"unknown product '{product}'")


class ProductWriter:
    def __init__(self, root: str, options: ProductOptions):
        self._root = root
        self._options = options

    @property
    def root(self) -> str:
        return self._root

    def write(self, output: ProductOutput, relativeDir: str = "") -> List[str]:
        directory = os.path.join(self._root, relativeDir, output.name)
        os.makedirs(directory, exist_ok = True)
        stem = os.path.join(directory, output.name)

        writeGeoTiff(output.grid, stem + ".tif", sampleFormat = "float32")
        writePng(output.image, stem + ".png")
        with open(stem + ".json", "w", encoding = "utf-8") as f:
            json.dump(output.metadata, f, indent = 2, sort_keys = True)

        if output.histogramGrid is not None:
            counts = histogram(output.histogramGrid, self._options.histogramBins, workers = self._options.workers)
            counts.toDataFrame().to_csv(stem + ".csv", index = False)

        if output.reportSource is not None:
            bandReport(output.reportSource, os.path.join(directory, "bands"),
                       self._options.lowerPct, self._options.upperPct, self._options.histogramBins)

        files = []
        for base, _, names in os.walk(directory):
            files += [os.path.relpath(os.path.join(base, n), self._root) for n in names]
        logger.info(f"Wrote product {output.name} -> {directory} ({len(files)} files)")
        return sorted(files)


def writeProducts(composite: RasterGrid, products: Sequence[str], writer: ProductWriter,
                  options: ProductOptions, relativeDir: str = "") -> List[str]:
    files = []
    for product in products:
        files += writer.write(buildProduct(product, composite, options), relativeDir)
    return files


def writeComposite(stack: CompositeStack, directory: str) -> List[str]:
    """composite.tif (float32 means), counts.tif (uint16 observation counts) and provenance.json."""
    os.makedirs(directory, exist_ok = True)
    compositePath = os.path.join(directory, "composite.tif")
    countsPath = os.path.join(directory, "counts.tif")
    provenancePath = os.path.join(directory, "provenance.json")

    writeGeoTiff(stack.grid, compositePath, sampleFormat = "float32")
    counts = RasterGrid.fromBandNames(np.minimum(stack.counts, 65535), stack.grid.mask, stack.grid.geo, ["count"])
    writeGeoTiff(counts, countsPath, sampleFormat = "uint16", scale = 1.0)

    provenance = {**stack.provenance, 'quantileMethod': QUANTILE_METHOD, 'bsiBandMapping': dict(BSI_BANDS),
                  'validPixels': stack.grid.validCount}
    with open(provenancePath, "w", encoding = "utf-8") as f:
        json.dump(provenance, f, indent = 2, sort_keys = True)

    logger.info(f"Wrote composite {stack.grid} -> {directory}")
    return [compositePath, countsPath, provenancePath]
