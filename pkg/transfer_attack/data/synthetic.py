"""
Synthetic Gaussian-blob corpus for fast tests and smoke runs.

Class k is an intensity blob centered at a fixed point on a circle around
the canvas center; every image adds Normal(0, 0.05) pixel noise and is
clamped to [0,1].
"""

import math
import logging

import numpy as np

from ..errors import ConfigurationError
from .dataset import LabeledDataset

logger = logging.getLogger(__name__)


def blob_centers(num_classes: int, size: int) -> list[tuple[float, float]]:
    radius = 0.3 * size
    mid = (size - 1) / 2
    return [
        (mid + radius * math.sin(2 * math.pi * k / num_classes),
         mid + radius * math.cos(2 * math.pi * k / num_classes))
        for k in range(num_classes)
    ]


def synthetic_blobs(n_per_class: int, num_classes: int, size: int,
                    seed: int = 0, noise: float = 0.05) -> LabeledDataset:
    """n_per_class noisy blobs per class on a size×size canvas, shuffled."""
    if num_classes < 2:
        raise ConfigurationError(f"Need at least 2 classes, got {num_classes}")
    if n_per_class < 1 or size < 1:
        raise ConfigurationError("n_per_class and size must be positive")

    rng = np.random.default_rng(seed)
    width = max(size / 8, 0.75)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)

    images = []
    labels = []
    for k, (cy, cx) in enumerate(blob_centers(num_classes, size)):
        blob = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * width ** 2))
        noisy = blob[None, None] + rng.normal(0.0, noise, size=(n_per_class, 1, size, size))
        images.append(np.clip(noisy, 0.0, 1.0))
        labels.extend([k] * n_per_class)

    order = rng.permutation(n_per_class * num_classes)
    images = np.concatenate(images)[order]
    labels = np.asarray(labels, dtype=np.int64)[order]
    logger.debug(f"Generated {len(labels)} synthetic blobs ({num_classes} classes, {size}x{size})")
    return LabeledDataset(images, labels, num_classes)
