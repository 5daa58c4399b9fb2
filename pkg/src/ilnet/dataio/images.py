"""8-bit grayscale image and mask I/O (PGM P5 read/write, PNG read)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

MASK_THRESHOLD = 127
# Pillow modes that hold more than 8 bits per sample
_WIDE_MODES = {"I", "I;16", "I;16B", "I;16L", "I;16N", "F"}


class DataError(RuntimeError):
    pass


def read_gray(path) -> np.ndarray:
    """Read an 8-bit grayscale image as a ``uint8 [H,W]`` array."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            if im.mode in _WIDE_MODES:
                raise DataError(f"{path}: unsupported bit depth (mode {im.mode}); only 8-bit images are accepted")
            if im.mode != "L":
                im = im.convert("L")
            return np.asarray(im, dtype=np.uint8).copy()
    except FileNotFoundError as exc:
        raise DataError(f"{path}: no such file") from exc
    except (UnidentifiedImageError, OSError) as exc:
        raise DataError(f"{path}: unreadable image ({exc})") from exc


def write_pgm(path, pixels: np.ndarray) -> None:
    """Write a ``uint8 [H,W]`` array as binary PGM (P5)."""
    pixels = np.asarray(pixels)
    if pixels.ndim != 2 or pixels.dtype != np.uint8:
        raise ValueError(f"write_pgm needs a 2-D uint8 array, got {pixels.dtype} {pixels.shape}")
    h, w = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(pixels).tobytes())


def load_image(path) -> np.ndarray:
    """``float32 [3,H,W]`` in [0,1], the gray channel replicated three times."""
    g = read_gray(path).astype(np.float32) / 255.0
    return np.repeat(g[None], 3, axis=0)


def load_mask(path) -> np.ndarray:
    return read_gray(path) > MASK_THRESHOLD


def to_uint8(image: np.ndarray) -> np.ndarray:
    """Quantize a [0,1] map (``[H,W]`` or ``[C,H,W]``, first channel used) to uint8."""
    image = np.asarray(image)
    if image.ndim == 3:
        image = image[0]
    return np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)


def save_mask(path, mask: np.ndarray) -> None:
    write_pgm(path, np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8))
