"""Image and mask I/O, manifests, preprocessing and synthetic data."""

from .images import DataError, MASK_THRESHOLD, load_image, load_mask, read_gray, save_mask, to_uint8, write_pgm
from .manifest import DatasetManifest, ManifestEntry, load_manifest
from .prepare import Sample, prepare, resize_bilinear, resize_nearest
from .synth import MAX_TARGET, SynthConfig, synth_dataset, target_scr, value_noise

__all__ = [
    "DataError", "MASK_THRESHOLD", "load_image", "load_mask", "read_gray", "save_mask", "to_uint8", "write_pgm",
    "DatasetManifest", "ManifestEntry", "load_manifest",
    "Sample", "prepare", "resize_bilinear", "resize_nearest",
    "MAX_TARGET", "SynthConfig", "synth_dataset", "target_scr", "value_noise",
]
