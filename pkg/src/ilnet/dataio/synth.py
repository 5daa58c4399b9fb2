"""Synthetic infrared-like scenes: smooth clutter plus small Gaussian targets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from ..tensor.ops import interp_matrix
from .images import save_mask, to_uint8, write_pgm
from .manifest import DatasetManifest, ManifestEntry
from .prepare import Sample

MAX_TARGET = 15  # side of the square window a target is confined to
MASK_FRACTION = 0.25


@dataclass(frozen=True)
class SynthConfig:
    targets_per_image: Tuple[int, int] = (1, 3)  # inclusive range
    octaves: int = 4
    background_level: float = 0.45  # background occupies [0, background_level]
    peak_range: Tuple[float, float] = (0.6, 1.0)
    sigma_range: Tuple[float, float] = (0.8, 2.2)
    max_attempts: int = 200


def value_noise(rng: np.random.Generator, h: int, w: int, octaves: int) -> np.ndarray:
    """Sum of bilinearly upsampled random grids, coarse to fine with halving amplitude, scaled to [0,1]."""
    out = np.zeros((h, w))
    amp = 1.0
    for o in range(octaves):
        gh, gw = min(h, 2 ** (o + 2)), min(w, 2 ** (o + 2))
        grid = rng.random((gh, gw))
        out += amp * (interp_matrix(gh, h, np.float64) @ grid @ interp_matrix(gw, w, np.float64).T)
        amp *= 0.5
    lo, hi = out.min(), out.max()
    return (out - lo) / (hi - lo) if hi > lo else np.zeros_like(out)


def gaussian_target(rng: np.random.Generator, cfg: SynthConfig):
    """Peak, and the ``MAX_TARGET``-square window of a rotated anisotropic Gaussian with unit peak."""
    peak = rng.uniform(*cfg.peak_range)
    sx, sy = rng.uniform(*cfg.sigma_range, size=2)
    theta = rng.uniform(0, math.pi)
    dx, dy = rng.uniform(-0.5, 0.5, size=2)  # sub-pixel centre
    r = MAX_TARGET // 2
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1].astype(np.float64)
    xx, yy = xx - dx, yy - dy
    c, s = math.cos(theta), math.sin(theta)
    u, v = c * xx + s * yy, -s * xx + c * yy
    return peak, np.exp(-0.5 * ((u / sx) ** 2 + (v / sy) ** 2))


def _place(rng, h: int, w: int, count: int, cfg: SynthConfig) -> List[Tuple[int, int]]:
    r = MAX_TARGET // 2
    centres: List[Tuple[int, int]] = []
    for _ in range(cfg.max_attempts):
        if len(centres) == count:
            break
        cy, cx = int(rng.integers(r, h - r)), int(rng.integers(r, w - r))
        # windows plus a one-pixel gap never touch, so masks stay separate components
        if all(abs(cy - y) > MAX_TARGET or abs(cx - x) > MAX_TARGET for y, x in centres):
            centres.append((cy, cx))
    return centres


def synth_sample(rng: np.random.Generator, size: Tuple[int, int], cfg: SynthConfig, sid: str) -> Sample:
    h, w = size
    img = cfg.background_level * value_noise(rng, h, w, cfg.octaves)
    mask = np.zeros((h, w), dtype=bool)
    lo, hi = cfg.targets_per_image
    count = int(rng.integers(lo, hi + 1))
    r = MAX_TARGET // 2
    for cy, cx in _place(rng, h, w, count, cfg):
        peak, blob = gaussian_target(rng, cfg)
        win = (slice(cy - r, cy + r + 1), slice(cx - r, cx + r + 1))
        img[win] += peak * blob
        mask[win] |= blob > MASK_FRACTION
    img = np.clip(img, 0.0, 1.0)
    # store the 8-bit quantized image so in-memory and on-disk datasets agree exactly
    gray = to_uint8(img).astype(np.float32) / 255.0
    return Sample(np.repeat(gray[None], 3, axis=0), mask, sid)


def synth_dataset(
    count: int,
    size: Tuple[int, int] = (64, 64),
    seed: int = 0,
    config: Optional[SynthConfig] = None,
    out_dir=None,
    prefix: str = "synth",
) -> Tuple[List[Sample], Optional[DatasetManifest]]:
    """Generate ``count`` samples; with ``out_dir`` also write PGM files and ``manifest.tsv``."""
    cfg = config or SynthConfig()
    if count < 1:
        raise ValueError("count must be >= 1")
    h, w = (int(v) for v in size)
    if h < MAX_TARGET or w < MAX_TARGET:
        raise ValueError(f"image {h}x{w} is smaller than the {MAX_TARGET}x{MAX_TARGET} target window")
    lo, hi = cfg.targets_per_image
    if not 0 <= lo <= hi:
        raise ValueError(f"bad targets_per_image range {cfg.targets_per_image}")
    cells = (h // (MAX_TARGET + 1)) * (w // (MAX_TARGET + 1))
    if hi > max(cells, 1):
        raise ValueError(f"{hi} targets do not fit in a {h}x{w} image")
    root = np.random.SeedSequence(seed)
    samples = [
        synth_sample(np.random.default_rng(child), (h, w), cfg, f"{prefix}{i:04d}")
        for i, child in enumerate(root.spawn(count))
    ]
    manifest = None
    if out_dir is not None:
        out = Path(out_dir)
        (out / "images").mkdir(parents=True, exist_ok=True)
        (out / "masks").mkdir(parents=True, exist_ok=True)
        entries = []
        for s in samples:
            img_p, msk_p = out / "images" / f"{s.id}.pgm", out / "masks" / f"{s.id}.pgm"
            write_pgm(img_p, to_uint8(s.image))
            save_mask(msk_p, s.mask)
            entries.append(ManifestEntry(s.id, img_p, msk_p))
        manifest = DatasetManifest(entries, (h, w), path=out / "manifest.tsv")
        manifest.save(manifest.path)
    return samples, manifest


def target_scr(sample: Sample, ring: int = 4) -> List[float]:
    """Per-target (peak - local background mean) / local background std, background taken from a ring around the mask."""
    from scipy import ndimage

    from ..metrics.components import label_components

    img = sample.image[0].astype(np.float64)
    out = []
    for comp in label_components(sample.mask):
        own = np.zeros_like(sample.mask)
        own[comp.pixels[:, 0], comp.pixels[:, 1]] = True
        around = ndimage.binary_dilation(own, iterations=ring) & ~ndimage.binary_dilation(sample.mask, iterations=1)
        bg = img[around]
        std = bg.std()
        out.append(float((img[own].max() - bg.mean()) / std) if std > 0 else float("inf"))
    return out
