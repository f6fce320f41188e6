import logging
from typing import Sequence, Tuple, Union

import numpy as np

from models.bands import describeBand
from models.products import CompositeStack, CompositeTriple, IndexProduct
from models.rasterGrid import RasterGrid

logger = logging.getLogger(__name__)

StackLike = Union[CompositeStack, RasterGrid]

# Bare Soil Index with SWIR2 in the SWIR slot
BSI_BANDS = {"red": "B4", "swir": "B12", "nir": "B8", "blue": "B2"}
BSI_FORMULA = "((B4+B12)-(B8+B2))/((B4+B12)+(B8+B2))"
NDVI_FORMULA = "(B8-B4)/(B8+B4)"


def asGrid(stack: StackLike) -> RasterGrid:
    return stack.grid if isinstance(stack, CompositeStack) else stack


def normalizedDifference(positive: np.ndarray, negative: np.ndarray, mask: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(p - n) / (p + n) over valid pixels; a zero denominator makes the pixel invalid."""
    denominator = positive + negative
    valid = mask & (denominator != 0)
    values = np.divide(positive - negative, denominator, out = np.zeros_like(denominator), where = valid)
    return values, valid


def _indexProduct(grid: RasterGrid, values: np.ndarray, valid: np.ndarray, name: str, formula: str) -> IndexProduct:
    out = RasterGrid(values, valid, grid.geo, [describeBand(name)])
    dropped = grid.validCount - out.validCount
    if dropped:
        logger.info(f"{name}: {dropped} pixels invalid from zero denominators")
    return IndexProduct(out, name, formula)


def bsi(stack: StackLike) -> IndexProduct:
    grid = asGrid(stack)
    red = grid.band(BSI_BANDS["red"], "composite")
    swir = grid.band(BSI_BANDS["swir"], "composite")
    nir = grid.band(BSI_BANDS["nir"], "composite")
    blue = grid.band(BSI_BANDS["blue"], "composite")

    values, valid = normalizedDifference(red + swir, nir + blue, grid.mask)
    return _indexProduct(grid, values, valid, "BSI", BSI_FORMULA)


def ndvi(stack: StackLike) -> IndexProduct:
    grid = asGrid(stack)
    nir = grid.band("B8", "composite")
    red = grid.band("B4", "composite")

    values, valid = normalizedDifference(nir, red, grid.mask)
    return _indexProduct(grid, values, valid, "NDVI", NDVI_FORMULA)


def compose(stack: StackLike, preset: Union[str, Sequence[str]] = "RGB") -> CompositeTriple:
    """Copy three bands, unstretched, into (R, G, B) display order."""
    grid = asGrid(stack)
    if isinstance(preset, str):
        key = preset.upper()
        if key not in CompositeTriple.PRESETS:
            raise ValueError(f"unknown composite preset '{preset}', expected one of {list(CompositeTriple.PRESETS)}")
        names, label = CompositeTriple.PRESETS[key], key
    else:
        names, label = tuple(preset), "custom"
        if len(names) != 3:
            raise ValueError(f"a custom composite needs exactly 3 bands, got {len(names)}")

    return CompositeTriple(grid.select(names, "composite"), label)
