import logging
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from models.bands import PCA_DEFAULT_BANDS, TCT_BANDS, describeBand
from models.errors import DegenerateBand, InsufficientData, OutOfRange
from models.products import (CompositeStack, CompositeTriple, HsvProduct, PcaResult, TCT_COMPONENTS,
                             TctCoefficients)
from models.rasterGrid import RasterGrid
from services.spectralIndices import StackLike, asGrid
from utils.jacobi import jacobiEigen
from utils.strips import mapStrips

logger = logging.getLogger(__name__)

PCA_MODES = ("correlation", "covariance")


# ====================================================================
# HSV

def hexconeRgbToHsv(r: np.ndarray, g: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    value = np.maximum(np.maximum(r, g), b)
    chroma = value - np.minimum(np.minimum(r, g), b)
    saturation = np.divide(chroma, value, out = np.zeros_like(value), where = value > 0)

    safe = np.where(chroma > 0, chroma, 1.0)
    sector = np.select(
        [chroma == 0, value == r, value == g],
        [0.0, np.mod((g - b) / safe, 6.0), (b - r) / safe + 2.0],
        (r - g) / safe + 4.0,
    )
    hue = sector / 6.0
    hue = np.where(hue >= 1.0, 0.0, hue)
    return hue, saturation, value


def hexconeHsvToRgb(h: np.ndarray, s: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    h6 = np.mod(h, 1.0) * 6.0
    sector = np.floor(h6)
    f = h6 - sector
    sector = sector.astype(np.int64) % 6

    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))

    conditions = [sector == k for k in range(6)]
    r = np.select(conditions, [v, q, p, p, t, v])
    g = np.select(conditions, [t, v, v, q, p, p])
    b = np.select(conditions, [p, p, t, v, v, q])
    return r, g, b


def _tripleGrid(triple: Union[CompositeTriple, RasterGrid]) -> RasterGrid:
    grid = triple.grid if isinstance(triple, CompositeTriple) else triple
    if grid.bandCount != 3:
        raise ValueError(f"HSV conversion needs 3 bands, got {grid.bandCount}")
    return grid


def rgbToHsv(triple: Union[CompositeTriple, RasterGrid]) -> HsvProduct:
    grid = _tripleGrid(triple)
    samples = grid.planes[:, grid.mask]
    if samples.size and (samples.min() < 0.0 or samples.max() > 1.0):
        raise OutOfRange(f"RGB samples must lie in [0, 1] for HSV, got [{samples.min()}, {samples.max()}]; "
                         f"stretch the composite first")

    h, s, v = hexconeRgbToHsv(*grid.planes)
    planes = np.stack([h, s, v])
    return HsvProduct(RasterGrid(planes, grid.mask, grid.geo, [describeBand(n) for n in ("H", "S", "V")]))


def hsvToRgb(hsv: HsvProduct, names: Sequence[str] = ("R", "G", "B")) -> RasterGrid:
    grid = hsv.grid
    r, g, b = hexconeHsvToRgb(*grid.planes)
    return RasterGrid(np.stack([r, g, b]), grid.mask, grid.geo, [describeBand(n) for n in names])


# ====================================================================
# TASSELLED CAP

def tct(stack: StackLike, coeffs: Optional[TctCoefficients] = None) -> RasterGrid:
    coeffs = coeffs or TctCoefficients()
    grid = asGrid(stack)
    bands = grid.select(TCT_BANDS, "composite")

    planes = np.einsum("kb,bhw->khw", coeffs.weights, bands.planes) + coeffs.bias[:, None, None]
    return RasterGrid(planes, grid.mask, grid.geo, [describeBand(n) for n in TCT_COMPONENTS])


# ====================================================================
# PCA

def _stripMoments(data: np.ndarray, mask: np.ndarray, row0: int, row1: int):
    samples = data[:, row0:row1][:, mask[row0:row1]]
    count = samples.shape[1]
    if count == 0:
        return 0, None, None
    mean = samples.mean(axis = 1)
    centred = samples - mean[:, None]
    return count, mean, centred @ centred.T


def mergeMoments(parts: List[tuple]) -> Tuple[int, np.ndarray, np.ndarray]:
    """Pairwise merge of (count, mean, co-moment) strip statistics, in list order."""
    total, mean, comoment = 0, None, None
    for count, partMean, partComoment in parts:
        if count == 0:
            continue
        if total == 0:
            total, mean, comoment = count, partMean, partComoment
            continue
        merged = total + count
        delta = partMean - mean
        mean = mean + delta * (count / merged)
        comoment = comoment + partComoment + np.outer(delta, delta) * (total * count / merged)
        total = merged
    return total, mean, comoment


def pca(stack: StackLike, bands: Optional[Sequence[str]] = None, mode: str = "correlation",
        workers: Optional[int] = None) -> PcaResult:
    if mode not in PCA_MODES:
        raise ValueError(f"PCA mode must be one of {PCA_MODES}, got '{mode}'")
    grid = asGrid(stack)
    names = list(bands) if bands else list(PCA_DEFAULT_BANDS)
    k = len(names)
    if k < 2:
        raise InsufficientData(f"PCA needs at least 2 bands, got {k}")

    data = grid.select(names, "composite").planes
    mask = grid.mask
    parts = mapStrips(lambda r0, r1: _stripMoments(data, mask, r0, r1), grid.height, workers)
    n, mean, comoment = mergeMoments(parts)
    if n < max(k, 2):
        raise InsufficientData(f"PCA over {k} bands needs at least {max(k, 2)} valid pixels, got {n}")

    covariance = comoment / (n - 1)
    sd = np.sqrt(np.clip(np.diag(covariance), 0.0, None))
    for i, name in enumerate(names):
        if sd[i] <= 1e-12 * max(abs(mean[i]), 1.0):
            if mode == "correlation":
                raise DegenerateBand(name)

    if mode == "correlation":
        matrix = covariance / np.outer(sd, sd)
        np.fill_diagonal(matrix, 1.0)
        scales = sd
    else:
        matrix = covariance
        scales = np.ones(k)
        if np.trace(matrix) <= 0:
            raise InsufficientData("all PCA bands are constant")

    eigenvalues, eigenvectors = jacobiEigen(matrix)

    def project(row0: int, row1: int) -> np.ndarray:
        standardized = (data[:, row0:row1] - mean[:, None, None]) / scales[:, None, None]
        return np.einsum("bc,bhw->chw", eigenvectors, standardized)

    scores = np.concatenate(mapStrips(project, grid.height, workers), axis = 1)
    scoreGrid = RasterGrid(scores, mask, grid.geo, [describeBand(f"PC{i + 1}") for i in range(k)])

    result = PcaResult(eigenvalues, eigenvectors, scoreGrid, mode, names, mean, scales, n)
    logger.info(f"PCA ({mode}) over {names} on {n} pixels: explained "
                f"{', '.join(f'{r:.3f}' for r in result.explainedVarianceRatio)}")
    return result


def explainedVariance(result: PcaResult, n: int) -> float:
    if not 1 <= n <= result.componentCount:
        raise ValueError(f"component count must be in [1, {result.componentCount}], got {n}")
    return float(np.sum(result.explainedVarianceRatio[:n]))
