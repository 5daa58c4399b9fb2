"""Pixel-level (IoU, nIoU) and target-level (Pd, Fa) scores and the threshold sweep.

Predictions and ground truths are paired lists of 2-D boolean masks.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import List, NamedTuple, Sequence

import numpy as np

from .components import component_centroids

MATCH_DISTANCE = 3.0


class ImageStats(NamedTuple):
    tp: int  # predicted and true
    pred: int  # predicted foreground
    target: int  # true foreground
    fp: int  # predicted foreground on true background
    pixels: int
    targets: int  # ground-truth components
    detected: int  # ground-truth components matched within MATCH_DISTANCE

    @property
    def union(self) -> int:
        return self.pred + self.target - self.tp


def _pair(preds, gts) -> list:
    if len(preds) != len(gts):
        raise ValueError(f"{len(preds)} predictions for {len(gts)} ground truths")
    pairs = []
    for p, g in zip(preds, gts):
        p, g = np.asarray(p, dtype=bool), np.asarray(g, dtype=bool)
        if p.shape != g.shape:
            raise ValueError(f"prediction {p.shape} and ground truth {g.shape} differ in size")
        pairs.append((p, g))
    return pairs


def match_targets(pred_centroids: np.ndarray, gt_centroids: np.ndarray, max_dist: float = MATCH_DISTANCE) -> int:
    """Greedy one-to-one matching by ascending centroid distance; counts pairs closer than ``max_dist``."""
    if len(pred_centroids) == 0 or len(gt_centroids) == 0:
        return 0
    d = np.sqrt(((gt_centroids[:, None, :] - pred_centroids[None, :, :]) ** 2).sum(-1))
    gi, pi = np.nonzero(d < max_dist)
    order = np.lexsort((pi, gi, d[gi, pi]))
    used_g, used_p = set(), set()
    for o in order:
        g, p = gi[o], pi[o]
        if g not in used_g and p not in used_p:
            used_g.add(g)
            used_p.add(p)
    return len(used_g)


def image_stats(pred: np.ndarray, gt: np.ndarray, with_targets: bool = True) -> ImageStats:
    tp = int(np.count_nonzero(pred & gt))
    npred = int(np.count_nonzero(pred))
    ngt = int(np.count_nonzero(gt))
    targets = detected = 0
    if with_targets:
        gc = component_centroids(gt)
        targets = len(gc)
        if npred and targets:
            detected = match_targets(component_centroids(pred), gc)
    return ImageStats(tp, npred, ngt, npred - tp, pred.size, targets, detected)


def _iou(tp: int, union: int) -> float:
    return 1.0 if union == 0 else tp / union


def iou_from_stats(stats: Sequence[ImageStats]) -> float:
    return _iou(sum(s.tp for s in stats), sum(s.union for s in stats))


def niou_from_stats(stats: Sequence[ImageStats]) -> float:
    if not stats:
        return float("nan")
    return float(np.mean([_iou(s.tp, s.union) for s in stats]))


def pd_from_stats(stats: Sequence[ImageStats]) -> float:
    total = sum(s.targets for s in stats)
    if total == 0:
        warnings.warn("no ground-truth targets in the dataset; Pd is undefined", RuntimeWarning, stacklevel=2)
        return float("nan")
    return sum(s.detected for s in stats) / total


def fa_from_stats(stats: Sequence[ImageStats]) -> float:
    total = sum(s.pixels for s in stats)
    return 0.0 if total == 0 else sum(s.fp for s in stats) / total


def iou_dataset(preds, gts) -> float:
    """Dataset IoU: total intersection over total union (1.0 if both are empty everywhere)."""
    return iou_from_stats([image_stats(p, g, False) for p, g in _pair(preds, gts)])


def niou_dataset(preds, gts) -> float:
    """Mean of per-image IoU; an empty prediction on an empty ground truth scores 1.0."""
    return niou_from_stats([image_stats(p, g, False) for p, g in _pair(preds, gts)])


def pd(preds, gts) -> float:
    return pd_from_stats([image_stats(p, g) for p, g in _pair(preds, gts)])


def fa(preds, gts) -> float:
    """False-positive pixels over all pixels of all images."""
    return fa_from_stats([image_stats(p, g, False) for p, g in _pair(preds, gts)])


@dataclass
class RocPoint:
    threshold: float
    pd: float
    fa: float


def roc_sweep(prob_maps, gts, thresholds) -> List[RocPoint]:
    """Pd and Fa at each threshold (foreground where ``prob >= threshold``)."""
    thresholds = [float(t) for t in thresholds]
    if not thresholds:
        raise ValueError("roc_sweep needs at least one threshold")
    if any(b >= a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be strictly descending")
    probs = [np.asarray(p, dtype=np.float64) for p in prob_maps]
    gts = [np.asarray(g, dtype=bool) for g in gts]
    _pair(probs, gts)
    gt_centroids = [component_centroids(g) for g in gts]
    total_targets = sum(len(c) for c in gt_centroids)
    total_pixels = sum(g.size for g in gts)
    points = []
    for t in thresholds:
        detected = fp = 0
        for p, g, gc in zip(probs, gts, gt_centroids):
            pred = p >= t
            fp += int(np.count_nonzero(pred & ~g))
            if len(gc) and pred.any():
                detected += match_targets(component_centroids(pred), gc)
        pd_val = detected / total_targets if total_targets else float("nan")
        points.append(RocPoint(t, pd_val, fp / total_pixels if total_pixels else 0.0))
    return points
