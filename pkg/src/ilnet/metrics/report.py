"""Aggregated evaluation report with JSON and CSV output."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .scores import (
    RocPoint,
    _pair,
    fa_from_stats,
    image_stats,
    iou_from_stats,
    niou_from_stats,
    pd_from_stats,
    roc_sweep,
    _iou,
)

DEFAULT_THRESHOLD = 0.5
ROC_HEADER = "threshold,Pd,Fa"


def _fmt(v: float) -> str:
    return "nan" if math.isnan(v) else f"{v:.6f}"


def _num(v: float):
    """JSON-safe float rounded to the fixed 6-decimal output precision."""
    return None if math.isnan(v) else round(float(v), 6)


@dataclass
class MetricsReport:
    iou: float
    niou: float
    pd: float
    fa: float
    per_image_iou: List[float]
    detected_targets: int  # matched ground-truth components
    total_targets: int  # ground-truth components
    fp_pixels: int
    all_pixels: int
    threshold: float = DEFAULT_THRESHOLD
    roc: Optional[List[RocPoint]] = field(default=None)

    def to_dict(self) -> dict:
        """Headline metrics in percent (IoU, nIoU, Pd) and Fa scaled by 1e6; raw fractions under ``raw``."""
        out = {
            "IoU": _num(100 * self.iou),
            "nIoU": _num(100 * self.niou),
            "Pd": _num(100 * self.pd),
            "Fa": _num(1e6 * self.fa),
            "units": {"IoU": "%", "nIoU": "%", "Pd": "%", "Fa": "1e-6"},
            "threshold": _num(self.threshold),
            "raw": {"IoU": _num(self.iou), "nIoU": _num(self.niou), "Pd": _num(self.pd), "Fa": _num(self.fa)},
            "per_image_IoU": [_num(v) for v in self.per_image_iou],
            "TP_sum": self.detected_targets,
            "T_sum": self.total_targets,
            "FP_pixels": self.fp_pixels,
            "ALL_pixels": self.all_pixels,
        }
        if self.roc is not None:
            out["roc"] = [{"threshold": _num(p.threshold), "Pd": _num(p.pd), "Fa": _num(p.fa)} for p in self.roc]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def roc_csv(points: Sequence[RocPoint]) -> str:
    lines = [ROC_HEADER] + [f"{_fmt(p.threshold)},{_fmt(p.pd)},{_fmt(p.fa)}" for p in points]
    return "\n".join(lines) + "\n"


def roc_thresholds(num: int) -> List[float]:
    """``linspace(1, 0, num)`` with the top threshold nudged just above 1 so it binarizes to empty."""
    if num < 2:
        raise ValueError("need at least 2 thresholds")
    ts = np.linspace(1.0, 0.0, num)
    ts[0] = np.nextafter(1.0, np.inf)
    return [float(t) for t in ts]


def evaluate_masks(preds, gts, threshold: float = DEFAULT_THRESHOLD) -> MetricsReport:
    stats = [image_stats(p, g) for p, g in _pair(preds, gts)]
    return MetricsReport(
        iou=iou_from_stats(stats),
        niou=niou_from_stats(stats),
        pd=pd_from_stats(stats),
        fa=fa_from_stats(stats),
        per_image_iou=[_iou(s.tp, s.union) for s in stats],
        detected_targets=sum(s.detected for s in stats),
        total_targets=sum(s.targets for s in stats),
        fp_pixels=sum(s.fp for s in stats),
        all_pixels=sum(s.pixels for s in stats),
        threshold=threshold,
    )


def evaluate(prob_maps, gts, threshold: float = DEFAULT_THRESHOLD, roc_thresholds_list=None) -> MetricsReport:
    """Binarize probability maps at ``threshold`` (``>=``) and score them; optionally attach an ROC sweep."""
    probs = [np.asarray(p, dtype=np.float64) for p in prob_maps]
    report = evaluate_masks([p >= threshold for p in probs], gts, threshold)
    if roc_thresholds_list is not None:
        report.roc = roc_sweep(probs, gts, roc_thresholds_list)
    return report
