#!/usr/bin/env python3
"""
palaeolens command line
Seasonal Sentinel-2 composites and spectral products for palaeo-landscape survey
"""
import argparse
import copy
import logging
import os
import sys
from typing import List, Optional

import pandas as pd

from catalog.directorySource import ingestDirectory
from catalog.filtering import filterCatalog
from catalog.stacSource import stacSearch
from config import settings
from config.pipelineConfig import PRODUCTS, PipelineConfig, loadConfig, parseConfig
from geotiff.geotiffReader import readGeoTiff
from geotiff.pngWriter import writePng
from models.errors import ConfigError, PalaeoError
from models.geo import RegionOfInterest
from services.compositor import windowComposites
from services.pipelineRunner import (EXIT_CONFIG, EXIT_DATA, EXIT_EMPTY, EXIT_OK, buildSource, productOptions,
                                     runPipeline, windowDirName)
from services.productWriter import ProductWriter, buildProduct, writeComposite
from services.renderStats import autoStretch, render
from synthetic.sceneGenerator import generateSceneSet

logger = logging.getLogger("palaeolens")

INDEX_PRODUCTS = ("bsi", "ndvi")
DECOMPOSE_PRODUCTS = ("pca", "tct", "hsv", "rgb", "fswir")


# ====================================================================
# LOGGING

def setupLogging(verbose: bool = False):
    handlers = [logging.StreamHandler(sys.stderr)]
    if settings.LOG_FILE:
        handlers.append(logging.FileHandler(settings.LOG_FILE))
    logging.basicConfig(
        level = logging.DEBUG if verbose else logging.INFO,
        format = '%(asctime)s - %(levelname)s - %(message)s',
        handlers = handlers,
        force = True,
    )


# ====================================================================
# CONFIG + OVERRIDES

def _splitList(text: str) -> List[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


def _parseWindows(text: str) -> List[dict]:
    """'jan-mar:01-01:03-31,oct-dec:10-01:12-31'"""
    windows = []
    for item in _splitList(text):
        parts = item.split(":")
        if len(parts) != 3:
            raise ValueError(f"window '{item}' must be name:MM-DD:MM-DD")
        windows.append({'name': parts[0], 'start': parts[1], 'end': parts[2]})
    return windows


def _parseYears(text: str):
    parts = text.split("-")
    if len(parts) == 1:
        return int(parts[0]), int(parts[0])
    if len(parts) != 2:
        raise ValueError("expected YYYY or YYYY-YYYY")
    return int(parts[0]), int(parts[1])


def _parseStretch(text: str):
    parts = _splitList(text)
    if len(parts) != 2:
        raise ValueError("expected lo,hi")
    return float(parts[0]), float(parts[1])


def applyOverrides(document: dict, args: argparse.Namespace) -> dict:
    """Fold command-line flags into a config document before validation."""
    document = copy.deepcopy(document)
    flag = None
    try:
        if getattr(args, "roi", None):
            flag = "--roi"
            document['roi'] = RegionOfInterest.parse(args.roi).toDict()
        if getattr(args, "windows", None):
            flag = "--windows"
            document['windows'] = _parseWindows(args.windows)
        if getattr(args, "years", None):
            flag = "--years"
            document['yearStart'], document['yearEnd'] = _parseYears(args.years)
        if getattr(args, "max_cloud", None) is not None:
            document['maxCloudPct'] = args.max_cloud
        if getattr(args, "products", None):
            document['products'] = _splitList(args.products)
        if getattr(args, "stretch", None):
            flag = "--stretch"
            lower, upper = _parseStretch(args.stretch)
            document['stretch'] = {**document.get('stretch', {}), 'lowerPct': lower, 'upperPct': upper}
        if getattr(args, "pca_mode", None):
            document['pcaMode'] = args.pca_mode
        if getattr(args, "output", None):
            document['outputDir'] = args.output
        if getattr(args, "input", None):
            document['input'] = {'directory': args.input}
        if getattr(args, "workers", None):
            document['workers'] = args.workers
    except ValueError as e:
        raise ConfigError(flag or "<flags>", str(e))
    return document


def resolveConfig(args: argparse.Namespace) -> PipelineConfig:
    path = args.config or settings.DEFAULT_CONFIG_PATH
    base = loadConfig(path)
    return parseConfig(applyOverrides(base.toDict(), args), path)


# ====================================================================
# SUBCOMMANDS

def _printTable(frame: pd.DataFrame):
    if frame.empty:
        print("(no scenes)")
        return
    with pd.option_context("display.max_rows", None, "display.width", 200):
        print(frame.drop(columns = ["bands"], errors = "ignore").to_string(index = False))


def cmdIngest(args: argparse.Namespace) -> int:
    catalog = ingestDirectory(args.input)
    if args.filter:
        catalog = filterCatalog(catalog, resolveConfig(args).filterSpec())
    _printTable(catalog.toDataFrame())
    return EXIT_OK


def cmdSearch(args: argparse.Namespace) -> int:
    config = resolveConfig(args)
    endpoint = args.endpoint or settings.STAC_ENDPOINT or config.input.stacEndpoint
    if not endpoint:
        raise ConfigError("--endpoint", "no STAC endpoint given (flag, PALAEO_STAC_ENDPOINT or input.stacEndpoint)")

    bbox = None
    if args.bbox:
        try:
            bbox = [float(v) for v in _splitList(args.bbox)]
        except ValueError as e:
            raise ConfigError("--bbox", str(e))
        if len(bbox) != 4:
            raise ConfigError("--bbox", "expected minlon,minlat,maxlon,maxlat")
    elif config.input.bbox:
        bbox = config.input.bbox

    records = stacSearch(endpoint, config.filterSpec(), bbox = bbox)
    frame = pd.DataFrame([{
        'sceneId': r.sceneId,
        'acquiredAt': r.acquiredAt,
        'cloudCoverPct': r.cloudCoverPct,
        'bands': len(r.bandFiles),
    } for r in records])
    print(frame.to_string(index = False) if not frame.empty else "(no scenes)")
    print(f"{len(records)} scenes")
    return EXIT_OK


def cmdComposite(args: argparse.Namespace) -> int:
    config = resolveConfig(args)
    spec = config.filterSpec()
    catalog = buildSource(config).loadCatalog(spec)
    result = windowComposites(catalog, spec, config.bands, config.compositeMode,
                              config.reflectanceScale, config.targetResolutionM, config.workers)

    for key, stack in sorted(result.composites.items()):
        directory = os.path.join(config.outputDir, windowDirName(key, spec), "composite")
        for path in writeComposite(stack, directory):
            print(path)
    if not result.composites:
        print("error: every window bucket is empty", file = sys.stderr)
        return EXIT_EMPTY
    return EXIT_OK


def _writeFromComposite(args: argparse.Namespace, products: List[str]) -> int:
    config = resolveConfig(args)
    options = productOptions(config)
    grid, _ = readGeoTiff(args.composite)
    writer = ProductWriter(args.output or config.outputDir, options)
    for product in products:
        for path in writer.write(buildProduct(product, grid, options)):
            print(os.path.join(writer.root, path))
    return EXIT_OK


def cmdIndex(args: argparse.Namespace) -> int:
    return _writeFromComposite(args, args.names)


def cmdDecompose(args: argparse.Namespace) -> int:
    return _writeFromComposite(args, args.names)


def cmdRender(args: argparse.Namespace) -> int:
    grid, _ = readGeoTiff(args.raster)
    if args.bands:
        grid = grid.select(_splitList(args.bands), args.raster)
    lower, upper = 2.0, 98.0
    if args.stretch:
        try:
            lower, upper = _parseStretch(args.stretch)
        except ValueError as e:
            raise ConfigError("--stretch", str(e))
    if not 0 <= lower < upper <= 100:
        raise ConfigError("--stretch", f"need 0 <= lo < hi <= 100, got {lower},{upper}")

    params = autoStretch(grid, lower, upper)
    writePng(render(grid, params), args.png)
    print(args.png)
    return EXIT_OK


def cmdSynth(args: argparse.Namespace) -> int:
    output = args.output or os.path.join(settings.DATA_DIR, "scenes")
    sceneSet = generateSceneSet(output, nScenes = args.scenes, noiseSd = args.noise, seed = args.seed,
                                width = args.size, height = args.size, workers = args.workers)
    print(f"{len(sceneSet.catalog)} scenes -> {sceneSet.outDir}")
    return EXIT_OK


def cmdPipeline(args: argparse.Namespace) -> int:
    result = runPipeline(resolveConfig(args))
    if result.exitCode == EXIT_EMPTY:
        print("error: every window bucket is empty", file = sys.stderr)
    print(result.manifestPath)
    return result.exitCode


# ====================================================================
# ARGUMENTS

def _addConfigFlags(parser: argparse.ArgumentParser, output: bool = True):
    parser.add_argument("--config", help = "Pipeline config JSON (default: config/defaultConfig.json)")
    if output:
        parser.add_argument("--output", help = "Output directory")
    parser.add_argument("--roi", help = "minx,miny,maxx,maxy,epsg")
    parser.add_argument("--windows", help = "name:MM-DD:MM-DD[,name:MM-DD:MM-DD...]")
    parser.add_argument("--years", help = "YYYY or YYYY-YYYY")
    parser.add_argument("--max-cloud", type = float, help = "Maximum scene cloud cover, percent")
    parser.add_argument("--stretch", help = "lo,hi percentiles of the display stretch")
    parser.add_argument("--pca-mode", choices = ["correlation", "covariance"])
    parser.add_argument("--workers", type = int, help = "Worker threads (default PALAEO_WORKERS or CPU count)")


def buildParser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog = "palaeolens", description = __doc__.strip().splitlines()[0])
    parser.add_argument("--verbose", action = "store_true", help = "Debug logging")
    sub = parser.add_subparsers(dest = "command", required = True)

    ingest = sub.add_parser("ingest", help = "List the scenes of a scene directory")
    _addConfigFlags(ingest, output = False)
    ingest.add_argument("--input", required = True, help = "Scene directory")
    ingest.add_argument("--filter", action = "store_true", help = "Apply the configured window/year/cloud filter")

    search = sub.add_parser("search", help = "Query a STAC API for matching scenes")
    _addConfigFlags(search, output = False)
    search.add_argument("--endpoint", help = "STAC API root (default PALAEO_STAC_ENDPOINT or config)")
    search.add_argument("--bbox", help = "minlon,minlat,maxlon,maxlat")

    composite = sub.add_parser("composite", help = "Write seasonal mean composites")
    _addConfigFlags(composite)
    composite.add_argument("--input", help = "Scene directory (overrides config input)")

    index = sub.add_parser("index", help = "Spectral indices from a composite GeoTIFF")
    _addConfigFlags(index)
    index.add_argument("names", nargs = "+", choices = INDEX_PRODUCTS)
    index.add_argument("--composite", required = True, help = "composite.tif")

    decompose = sub.add_parser("decompose", help = "PCA / TCT / HSV / colour composites from a composite GeoTIFF")
    _addConfigFlags(decompose)
    decompose.add_argument("names", nargs = "+", choices = DECOMPOSE_PRODUCTS)
    decompose.add_argument("--composite", required = True, help = "composite.tif")

    renderCmd = sub.add_parser("render", help = "Stretch a 1- or 3-band GeoTIFF to PNG")
    renderCmd.add_argument("raster", help = "Input GeoTIFF")
    renderCmd.add_argument("png", help = "Output PNG")
    renderCmd.add_argument("--bands", help = "Band names to show, e.g. B4,B3,B2")
    renderCmd.add_argument("--stretch", help = "lo,hi percentiles (default 2,98)")

    synth = sub.add_parser("synth", help = "Generate a synthetic scene set with a planted palaeochannel")
    synth.add_argument("--output", help = "Scene directory (default $PALAEO_DATA_DIR/scenes)")
    synth.add_argument("--scenes", type = int, default = 12)
    synth.add_argument("--size", type = int, default = 512, help = "Width and height in 10 m pixels")
    synth.add_argument("--noise", type = float, default = 0.05, help = "Gaussian noise sd, reflectance")
    synth.add_argument("--seed", type = int, default = 0)
    synth.add_argument("--workers", type = int)

    pipeline = sub.add_parser("pipeline", help = "Run ingest, composite and every configured product")
    _addConfigFlags(pipeline)
    pipeline.add_argument("--input", help = "Scene directory (overrides config input)")
    pipeline.add_argument("--products", help = f"Comma list from {','.join(PRODUCTS)}")

    return parser


COMMANDS = {
    "ingest": cmdIngest,
    "search": cmdSearch,
    "composite": cmdComposite,
    "index": cmdIndex,
    "decompose": cmdDecompose,
    "render": cmdRender,
    "synth": cmdSynth,
    "pipeline": cmdPipeline,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = buildParser().parse_args(argv)
    setupLogging(args.verbose)

    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file = sys.stderr)
        return EXIT_CONFIG
    except (PalaeoError, OSError, ValueError) as e:
        print(f"error: {type(e).__name__}: {e}", file = sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
