import logging
import struct
import zlib

import numpy as np

logger = logging.getLogger(__name__)

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
COLOR_GRAY = 0
COLOR_RGB = 2


def _chunk(kind: bytes, payload: bytes) -> bytes:
    crc = zlib.crc32(kind + payload) & 0xFFFFFFFF
    return struct.pack(">I", len(payload)) + kind + payload + struct.pack(">I", crc)


def encodePng(image: np.ndarray) -> bytes:
    """
    Encode an 8-bit image as PNG. A (h, w) array is written as grayscale,
    a (h, w, 3) array as RGB. No interlace, filter type 0 on every scanline.
    """
    image = np.asarray(image)
    if image.dtype != np.uint8:
        raise ValueError(f"PNG export needs uint8 samples, got {image.dtype}")

    if image.ndim == 2:
        colorType = COLOR_GRAY
        height, width = image.shape
    elif image.ndim == 3 and image.shape[2] == 3:
        colorType = COLOR_RGB
        height, width = image.shape[:2]
    else:
        raise ValueError(f"PNG export needs (h, w) or (h, w, 3) image, got shape {image.shape}")

    if width < 1 or height < 1:
        raise ValueError("PNG image must be at least 1x1")

    rows = np.ascontiguousarray(image).reshape(height, -1)
    scanlines = np.hstack([np.zeros((height, 1), dtype = np.uint8), rows])

    ihdr = struct.pack(">IIBBBBB", width, height, 8, colorType, 0, 0, 0)
    return (PNG_SIGNATURE
            + _chunk(b"IHDR", ihdr)
            + _chunk(b"IDAT", zlib.compress(scanlines.tobytes(), 6))
            + _chunk(b"IEND", b""))


def writePng(image: np.ndarray, path: str):
    data = encodePng(image)
    with open(path, "wb") as f:
        f.write(data)
    logger.debug(f"Wrote PNG {path} ({len(data)} bytes)")
