"""
IDX (MNIST-format) reader and writer.

Image files: big-endian magic 0x00000803, u32 count, u32 rows, u32 cols,
then count·rows·cols unsigned bytes. Label files: magic 0x00000801, u32
count, then count unsigned bytes. Pixels are divided by 255 and images are
promoted to 1×H×W. Files ending in .gz are decompressed transparently.
"""

import os
import gzip
import struct
import logging
from typing import Optional

import numpy as np

from ..errors import ConsistencyError, FormatError, TruncationError
from .dataset import LabeledDataset

logger = logging.getLogger(__name__)

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


def _read_bytes(path: str) -> bytes:
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "rb") as f:
        return f.read()


def _check_length(what: str, data: bytes, expected: int):
    if len(data) != expected:
        raise TruncationError(what, expected, len(data))


def parse_idx_images(data: bytes, what: str = "IDX images") -> np.ndarray:
    """Parse image bytes into an N×1×H×W float64 array in [0,1]."""
    _check_header(what, data, 16)
    magic, count, rows, cols = struct.unpack(">IIII", data[:16])
    if magic != IMAGES_MAGIC:
        raise FormatError(f"{what}: bad magic 0x{magic:08x} (expected 0x{IMAGES_MAGIC:08x})")
    _check_length(what, data, 16 + count * rows * cols)
    pixels = np.frombuffer(data, dtype=np.uint8, offset=16)
    return pixels.reshape(count, 1, rows, cols).astype(np.float64) / 255.0


def parse_idx_labels(data: bytes, what: str = "IDX labels") -> np.ndarray:
    _check_header(what, data, 8)
    magic, count = struct.unpack(">II", data[:8])
    if magic != LABELS_MAGIC:
        raise FormatError(f"{what}: bad magic 0x{magic:08x} (expected 0x{LABELS_MAGIC:08x})")
    _check_length(what, data, 8 + count)
    return np.frombuffer(data, dtype=np.uint8, offset=8).astype(np.int64)


def _check_header(what: str, data: bytes, size: int):
    if len(data) < size:
        raise TruncationError(f"{what} header", size, len(data))


def load_idx(images_path: str, labels_path: str,
             num_classes: Optional[int] = None) -> LabeledDataset:
    """Load an IDX image/label pair into a LabeledDataset."""
    images = parse_idx_images(_read_bytes(images_path), what=os.path.basename(images_path))
    labels = parse_idx_labels(_read_bytes(labels_path), what=os.path.basename(labels_path))
    if len(images) != len(labels):
        raise ConsistencyError(
            f"{images_path} holds {len(images)} images but "
            f"{labels_path} holds {len(labels)} labels"
        )
    if num_classes is None:
        num_classes = int(labels.max()) + 1 if len(labels) else 0
    logger.info(f"Loaded {len(images)} images of shape {images.shape[1:]} "
                f"from {images_path}")
    return LabeledDataset(images, labels, num_classes)


def encode_idx_images(pixels: np.ndarray) -> bytes:
    """Exact IDX bytes for an N×H×W uint8 array."""
    pixels = np.asarray(pixels, dtype=np.uint8)
    count, rows, cols = pixels.shape
    return struct.pack(">IIII", IMAGES_MAGIC, count, rows, cols) + pixels.tobytes()


def encode_idx_labels(labels) -> bytes:
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">II", LABELS_MAGIC, len(labels)) + labels.tobytes()


def write_idx(pixels: np.ndarray, labels, images_path: str, labels_path: str):
    """Write an IDX pair (gzip-compressed when the path ends in .gz)."""
    for path, payload in ((images_path, encode_idx_images(pixels)),
                          (labels_path, encode_idx_labels(labels))):
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        opener = gzip.open if path.endswith(".gz") else open
        with opener(path, "wb") as f:
            f.write(payload)


def resolve_idx_pair(prefix: str) -> tuple[str, str]:
    """
    Find the image/label files for a prefix such as ``data/mnist/train``:
    ``train-images-idx3-ubyte`` / ``train-labels-idx1-ubyte`` (or the
    ``.idx3-ubyte`` spelling), optionally gzipped.
    """
    candidates = [
        (f"{prefix}-images-idx3-ubyte", f"{prefix}-labels-idx1-ubyte"),
        (f"{prefix}-images.idx3-ubyte", f"{prefix}-labels.idx1-ubyte"),
    ]
    for images_path, labels_path in candidates:
        for suffix in ("", ".gz"):
            if os.path.exists(images_path + suffix) and os.path.exists(labels_path + suffix):
                return images_path + suffix, labels_path + suffix
    raise FileNotFoundError(f"No IDX image/label pair found for prefix '{prefix}'")
