import json
import logging
import os
import time
from typing import Dict, List, NamedTuple, Optional, Tuple

from catalog.directorySource import DirectorySource
from catalog.filtering import filterCatalog
from catalog.sceneSource import SceneSource
from catalog.stacSource import StacSource
from config import settings
from config.pipelineConfig import PipelineConfig, configHash
from models.products import CompositeStack
from models.sceneRecord import FilterSpec
from services.compositor import windowComposites
from services.productWriter import ProductOptions, ProductWriter, writeComposite, writeProducts
from services.rasterOps import toFloat32Precision
from utils.hashing import sha256File
from utils.lockfile import OutputLock

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_EMPTY = 3


class RunResult(NamedTuple):
    exitCode: int
    manifestPath: str
    manifest: dict


def windowDirName(key: Tuple[str, str], spec: FilterSpec) -> str:
    """jan-mar for the pooled bucket, jan-mar_2017 for a single year."""
    window, period = key
    return window if period == spec.pooledPeriod else f"{window}_{period}"


def productOptions(config: PipelineConfig) -> ProductOptions:
    return ProductOptions(lowerPct = config.stretch.lowerPct, upperPct = config.stretch.upperPct,
                          approximate = config.stretch.approximate, pcaMode = config.pcaMode,
                          pcaBands = config.pcaBands, workers = config.workers)


def buildSource(config: PipelineConfig) -> SceneSource:
    if config.input.directory is not None:
        return DirectorySource(config.input.directory)

    endpoint = settings.STAC_ENDPOINT or config.input.stacEndpoint
    bbox = config.input.bbox
    if bbox is None and config.roi.crsCode == 4326:
        bbox = [config.roi.minX, config.roi.minY, config.roi.maxX, config.roi.maxY]
    downloadDir = config.input.downloadDir or settings.DATA_DIR
    return StacSource(endpoint, downloadDir, bbox = bbox, workers = config.workers)


class PipelineRunner:
    def __init__(self, config: PipelineConfig, source: Optional[SceneSource] = None):
        self._config = config
        self._source = source or buildSource(config)
        self._writtenProducts = 0
        self._emptyBuckets = 0

    @property
    def config(self) -> PipelineConfig:
        return self._config

    def _relativeFiles(self, paths: List[str]) -> List[str]:
        return [os.path.relpath(p, self._config.outputDir) for p in paths]

    def _fileEntries(self, relativeFiles: List[str]) -> List[Dict[str, str]]:
        return [{'path': f.replace(os.sep, "/"), 'sha256': sha256File(os.path.join(self._config.outputDir, f))}
                for f in sorted(relativeFiles)]

    def _writeBucket(self, key: Tuple[str, str], stack: CompositeStack, writer: ProductWriter,
                     options: ProductOptions, spec: FilterSpec) -> List[str]:
        relativeDir = windowDirName(key, spec)
        composite = toFloat32Precision(stack.grid)
        files = writeProducts(composite, self._config.products, writer, options, relativeDir)
        self._writtenProducts += len(self._config.products)

        if self._config.writeComposites:
            directory = os.path.join(self._config.outputDir, relativeDir, "composite")
            files += self._relativeFiles(writeComposite(stack, directory))
        return files

    def run(self) -> RunResult:
        config = self._config
        spec = config.filterSpec()
        options = productOptions(config)
        writer = ProductWriter(config.outputDir, options)
        responseTime = {}

        with OutputLock(config.outputDir):
            totalStart = time.time()
            logger.info(f"Pipeline started: {self._source.getSourceName()} -> {config.outputDir}")

            ingestStart = time.time()
            catalog = self._source.loadCatalog(spec)
            responseTime['ingest_time'] = time.time() - ingestStart

            filterStart = time.time()
            filtered = filterCatalog(catalog, spec)
            responseTime['filter_time'] = time.time() - filterStart

            compositeStart = time.time()
            result = windowComposites(filtered, spec, config.bands, config.compositeMode,
                                      config.reflectanceScale, config.targetResolutionM, config.workers)
            responseTime['composite_time'] = time.time() - compositeStart

            productStart = time.time()
            buckets, files = [], []
            for key in sorted(set(result.composites) | set(result.emptyBuckets)):
                entry = {'window': key[0], 'period': key[1], 'directory': windowDirName(key, spec)}
                if key in result.emptyBuckets:
                    self._emptyBuckets += 1
                    buckets.append({**entry, 'status': "empty", 'sceneIds': [], 'validPixels': 0})
                    continue

                stack = result.composites[key]
                files += self._writeBucket(key, stack, writer, options, spec)
                buckets.append({**entry, 'status': "ok", 'sceneIds': stack.sceneIds,
                                'validPixels': stack.grid.validCount})
            responseTime['product_time'] = time.time() - productStart
            responseTime['total_time'] = time.time() - totalStart

            exitCode = EXIT_OK if result.composites else EXIT_EMPTY
            manifest = {
                'manifestVersion': MANIFEST_VERSION,
                'configHash': configHash(config),
                'config': config.toDict(),
                'source': self._source.getSourceName(),
                'scenes': [r.toDict() for r in filtered],
                'buckets': buckets,
                'files': self._fileEntries(files),
                'exitCode': exitCode,
                'timings': responseTime,
            }
            manifestPath = os.path.join(config.outputDir, MANIFEST_NAME)
            with open(manifestPath, "w", encoding = "utf-8") as f:
                json.dump(manifest, f, indent = 2, sort_keys = True)

        if exitCode == EXIT_EMPTY:
            logger.warning(f"All {self._emptyBuckets} buckets are empty, no products written")
        else:
            logger.info(f"✓ Pipeline done: {len(result.composites)} buckets, {self._writtenProducts} products, "
                        f"{self._emptyBuckets} empty ({responseTime['total_time']:.2f}s)")
        return RunResult(exitCode, manifestPath, manifest)


def runPipeline(config: PipelineConfig, source: Optional[SceneSource] = None) -> RunResult:
    return PipelineRunner(config, source).run()
