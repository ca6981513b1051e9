"""
Labeled image dataset shared by training, attacking and evaluation.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import ConsistencyError, DataFormatError, LabelError


@dataclass
class LabeledDataset:
    """Images (N×C×H×W, entries in [0,1]), labels (N,) and class count K."""

    images: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        self.images = np.ascontiguousarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4:
            raise DataFormatError(f"Images must be N×C×H×W, got shape {self.images.shape}")
        if len(self.images) != len(self.labels):
            raise ConsistencyError(
                f"{len(self.images)} images but {len(self.labels)} labels"
            )
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise LabelError(f"Labels must lie in [0, {self.num_classes})")
        if self.images.size and (self.images.min() < 0.0 or self.images.max() > 1.0):
            raise DataFormatError("Pixels must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def image_shape(self) -> tuple:
        return tuple(self.images.shape[1:])

    def subset(self, indices: Sequence[int]) -> "LabeledDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.images[indices], self.labels[indices], self.num_classes)

    def take(self, limit: Optional[int] = None, offset: int = 0) -> "LabeledDataset":
        """Contiguous slice; ``limit`` of 0/None keeps everything after offset."""
        end = len(self) if not limit else min(len(self), offset + limit)
        return self.subset(np.arange(offset, end))
