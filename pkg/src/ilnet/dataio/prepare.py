"""Samples and their resize/normalization to the network input size."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from ..tensor.ops import interp_matrix


@dataclass
class Sample:
    image: np.ndarray  # float32 [3,H,W]
    mask: np.ndarray  # bool [H,W]
    id: str

    def __post_init__(self):
        if self.image.ndim != 3 or self.image.shape[0] != 3:
            raise ValueError(f"sample {self.id}: image must be [3,H,W], got {self.image.shape}")
        if self.image.shape[1:] != self.mask.shape:
            raise ValueError(f"sample {self.id}: image {self.image.shape[1:]} and mask {self.mask.shape} differ")


def check_target(size: Tuple[int, int]) -> Tuple[int, int]:
    h, w = (int(v) for v in size)
    if h < 16 or w < 16 or h % 16 or w % 16:
        raise ValueError(f"target size {h}x{w} must be positive multiples of 16")
    return h, w


def resize_bilinear(image: np.ndarray, h: int, w: int) -> np.ndarray:
    """Half-pixel bilinear resize of ``[C,H,W]``."""
    mh = interp_matrix(image.shape[1], h, np.float64)
    mw = interp_matrix(image.shape[2], w, np.float64)
    return (mh @ image.astype(np.float64) @ mw.T).astype(np.float32)


def nearest_index(n_in: int, n_out: int) -> np.ndarray:
    """Source index for each output pixel, sampling at pixel centres."""
    return np.minimum(((np.arange(n_out) + 0.5) * n_in / n_out).astype(int), n_in - 1)


def resize_nearest(mask: np.ndarray, h: int, w: int) -> np.ndarray:
    return np.asarray(mask, dtype=bool)[np.ix_(nearest_index(mask.shape[0], h), nearest_index(mask.shape[1], w))]


def prepare(
    sample: Sample,
    target_size: Tuple[int, int],
    mean: Optional[Sequence[float]] = None,
    std: Optional[Sequence[float]] = None,
) -> Sample:
    """Resize to ``target_size`` (bilinear image, nearest mask) and optionally normalize per channel."""
    h, w = check_target(target_size)
    image, mask = sample.image, sample.mask
    if image.shape[1:] != (h, w):
        image = resize_bilinear(image, h, w)
        mask = resize_nearest(mask, h, w)
    if mean is not None or std is not None:
        m = np.asarray(mean if mean is not None else (0.0,) * 3, dtype=np.float32)[:, None, None]
        s = np.asarray(std if std is not None else (1.0,) * 3, dtype=np.float32)[:, None, None]
        image = (image - m) / s
    return replace(sample, image=image.astype(np.float32), mask=mask)
