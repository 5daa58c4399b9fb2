"""Segmentation and detection metrics: IoU, nIoU, Pd, Fa and ROC sweeps."""

from .components import Component, component_centroids, label_components
from .report import MetricsReport, evaluate, evaluate_masks, roc_csv, roc_thresholds
from .scores import (
    MATCH_DISTANCE,
    ImageStats,
    RocPoint,
    fa,
    image_stats,
    iou_dataset,
    match_targets,
    niou_dataset,
    pd,
    roc_sweep,
)

__all__ = [
    "Component", "component_centroids", "label_components",
    "MetricsReport", "evaluate", "evaluate_masks", "roc_csv", "roc_thresholds",
    "MATCH_DISTANCE", "ImageStats", "RocPoint", "fa", "image_stats", "iou_dataset",
    "match_targets", "niou_dataset", "pd", "roc_sweep",
]
