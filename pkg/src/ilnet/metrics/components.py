"""8-connected component labeling of binary masks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy import ndimage

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass
class Component:
    pixels: np.ndarray  # (area, 2) array of (row, col), row-major order
    area: int
    centroid: Tuple[float, float]  # (x, y) = (mean col, mean row)


def _label(mask: np.ndarray) -> Tuple[np.ndarray, int]:
    """Labels 1..k ordered by each component's first pixel in row-major order."""
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {mask.shape}")
    labels, k = ndimage.label(mask, structure=_EIGHT)
    if k > 1:
        flat = labels.ravel()
        ids, first = np.unique(flat, return_index=True)
        ids, first = ids[1:], first[1:]  # drop background
        remap = np.zeros(k + 1, dtype=labels.dtype)
        remap[ids[np.argsort(first, kind="stable")]] = np.arange(1, k + 1)
        labels = remap[labels]
    return labels, k


def label_components(mask) -> List[Component]:
    labels, k = _label(mask)
    comps = []
    if k == 0:
        return comps
    rows, cols = np.nonzero(labels)
    lab = labels[rows, cols]
    order = np.argsort(lab, kind="stable")
    rows, cols, lab = rows[order], cols[order], lab[order]
    bounds = np.searchsorted(lab, np.arange(1, k + 2))
    for i in range(k):
        r, c = rows[bounds[i] : bounds[i + 1]], cols[bounds[i] : bounds[i + 1]]
        comps.append(Component(np.stack([r, c], axis=1), len(r), (float(c.mean()), float(r.mean()))))
    return comps


def component_centroids(mask) -> np.ndarray:
    """``(k, 2)`` array of (x, y) centroids, same order as :func:`label_components`."""
    labels, k = _label(mask)
    if k == 0:
        return np.zeros((0, 2))
    rows, cols = np.indices(labels.shape)
    flat = labels.ravel()
    area = np.bincount(flat, minlength=k + 1)[1:]
    cx = np.bincount(flat, weights=cols.ravel(), minlength=k + 1)[1:] / area
    cy = np.bincount(flat, weights=rows.ravel(), minlength=k + 1)[1:] / area
    return np.stack([cx, cy], axis=1)
