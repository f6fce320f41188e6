from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, model_validator

from models.bands import TCT_BANDS
from models.errors import EmptyBucket, GridMismatch
from models.geo import RegionOfInterest
from models.rasterGrid import RasterGrid

QUANTILE_METHOD = "linear"


class CompositeStack:
    """Per-band temporal mean plus the per-pixel count of valid observations behind it."""

    def __init__(self, grid: RasterGrid, counts: np.ndarray, provenance: Optional[dict] = None):
        counts = np.asarray(counts, dtype = np.int64)
        if counts.shape != grid.mask.shape:
            raise GridMismatch(f"counts shape {counts.shape} does not match grid {grid.mask.shape}")
        if not np.array_equal(counts > 0, grid.mask):
            raise GridMismatch("composite mask must equal counts > 0")
        counts = counts.copy()
        counts.flags.writeable = False

        self._grid = grid
        self._counts = counts
        self._provenance = dict(provenance or {})

    @property
    def grid(self) -> RasterGrid:
        return self._grid

    @property
    def counts(self) -> np.ndarray:
        return self._counts

    @property
    def provenance(self) -> dict:
        return dict(self._provenance)

    @property
    def sceneIds(self) -> List[str]:
        return list(self._provenance.get("sceneIds", []))

    def withProvenance(self, **extra) -> "CompositeStack":
        return CompositeStack(self._grid, self._counts, {**self._provenance, **extra})

    def __repr__(self):
        return f"CompositeStack({self._grid}, scenes={len(self.sceneIds)})"


class IndexProduct:
    def __init__(self, grid: RasterGrid, indexName: str, formulaId: str):
        if grid.bandCount != 1:
            raise GridMismatch(f"index product must be single-band, got {grid.bandCount}")
        self.grid = grid
        self.indexName = indexName
        self.formulaId = formulaId

    def toDict(self):
        return {'index': self.indexName, 'formula': self.formulaId}


class CompositeTriple:
    PRESETS: Dict[str, Tuple[str, str, str]] = {
        "RGB": ("B4", "B3", "B2"),
        "FSWIR": ("B12", "B8", "B4"),
    }

    def __init__(self, grid: RasterGrid, preset: str):
        if grid.bandCount != 3:
            raise GridMismatch(f"composite triple needs exactly 3 bands, got {grid.bandCount}")
        self.grid = grid
        self.preset = preset

    def toDict(self):
        return {'preset': self.preset, 'slots': self.grid.bandNames}


class HsvProduct:
    def __init__(self, grid: RasterGrid):
        if grid.bandNames != ["H", "S", "V"]:
            raise GridMismatch(f"HSV product needs bands H,S,V, got {grid.bandNames}")
        self.grid = grid


# Sentinel-2 Tasselled Cap weights, rows brightness/greenness/wetness,
# columns Blue, Green, Red, NIR, SWIR1, SWIR2
S2_TCT_WEIGHTS = (
    (0.3510, 0.3813, 0.3437, 0.7196, 0.2396, 0.1949),
    (-0.3599, -0.3533, -0.4734, 0.6633, -0.0087, -0.2856),
    (0.2578, 0.2305, 0.0883, 0.1071, -0.7611, -0.5308),
)
TCT_COMPONENTS = ("TCTb", "TCTg", "TCTw")


class TctCoefficients:
    def __init__(self, weights: Sequence[Sequence[float]] = S2_TCT_WEIGHTS,
                 bias: Sequence[float] = (0.0, 0.0, 0.0)):
        weights = np.array(weights, dtype = np.float64)
        bias = np.array(bias, dtype = np.float64)
        if weights.shape != (3, len(TCT_BANDS)) or bias.shape != (3,):
            raise ValueError(f"TCT weights must be 3x{len(TCT_BANDS)} and bias a 3-vector")
        if not (np.isfinite(weights).all() and np.isfinite(bias).all()):
            raise ValueError("TCT coefficients must be finite")
        weights.flags.writeable = False
        bias.flags.writeable = False
        self._weights = weights
        self._bias = bias

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def bias(self) -> np.ndarray:
        return self._bias

    def toDict(self):
        return {'bands': list(TCT_BANDS), 'components': list(TCT_COMPONENTS),
                'weights': self._weights.tolist(), 'bias': self._bias.tolist()}


class PcaResult:
    def __init__(self, eigenvalues: np.ndarray, eigenvectors: np.ndarray, scores: RasterGrid,
                 mode: str, bands: Sequence[str], means: np.ndarray, scales: np.ndarray, sampleCount: int):
        self.eigenvalues = np.asarray(eigenvalues, dtype = np.float64)
        self.eigenvectors = np.asarray(eigenvectors, dtype = np.float64)
        self.scores = scores
        self.mode = mode
        self.bands = list(bands)
        self.means = np.asarray(means, dtype = np.float64)
        self.scales = np.asarray(scales, dtype = np.float64)
        self.sampleCount = int(sampleCount)
        self.explainedVarianceRatio = self.eigenvalues / self.eigenvalues.sum()

    @property
    def componentCount(self) -> int:
        return len(self.eigenvalues)

    def toReport(self, roi: Optional[RegionOfInterest] = None) -> dict:
        extent = roi if roi is not None else self.scores.extent
        return {
            'mode': self.mode,
            'bands': self.bands,
            'components': self.scores.bandNames,
            'eigenvalues': self.eigenvalues.tolist(),
            # eigenvectors[i][j]: loading of band i on component j
            'eigenvectors': self.eigenvectors.tolist(),
            'explainedVarianceRatio': self.explainedVarianceRatio.tolist(),
            'bandMeans': self.means.tolist(),
            'bandScales': self.scales.tolist(),
            'sampleCount': self.sampleCount,
            'roi': extent.toDict(),
        }


class StretchParams(BaseModel):
    lowerPct: float = Field(default = 2.0, ge = 0, le = 100)
    upperPct: float = Field(default = 98.0, ge = 0, le = 100)
    lowerValue: Optional[float] = None
    upperValue: Optional[float] = None
    quantileMethod: str = QUANTILE_METHOD

    @model_validator(mode = "after")
    def _checkOrder(self):
        if not self.lowerPct < self.upperPct:
            raise ValueError("lowerPct must be less than upperPct")
        if self.lowerValue is not None and self.upperValue is not None and self.lowerValue > self.upperValue:
            raise ValueError("lowerValue must not exceed upperValue")
        return self

    @property
    def resolved(self) -> bool:
        return self.lowerValue is not None and self.upperValue is not None

    def toDict(self):
        return self.model_dump()


class Histogram:
    def __init__(self, binEdges: np.ndarray, counts: np.ndarray, validTotal: int):
        self.binEdges = np.asarray(binEdges, dtype = np.float64)
        self.counts = np.asarray(counts, dtype = np.int64)
        self.validTotal = int(validTotal)

    @property
    def binCount(self) -> int:
        return len(self.counts)

    def toDataFrame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "lo": self.binEdges[:-1],
            "hi": self.binEdges[1:],
            "count": self.counts,
        })


class WindowComposites(NamedTuple):
    # keyed by (window name, period) where period is a year or the pooled "YYYY-YYYY" range
    composites: Dict[Tuple[str, str], CompositeStack]
    emptyBuckets: Dict[Tuple[str, str], EmptyBucket]
