"""
GADV adversarial-batch files.

Layout: magic "GADV", version u32, config fingerprint (32 raw bytes of a
SHA-256 digest), generator seed u64, count u32, then per example the
original dataset index u64 followed by a tensor record (rank, dims,
float64 payload). A CRC32 of all preceding bytes closes the file.
"""

import os
import struct
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import DriftError, FormatError, VersionError
from .binary import ByteReader, append_checksum, decode_tensor, encode_tensor, verify_checksum

logger = logging.getLogger(__name__)

MAGIC = b"GADV"
VERSION = 1


@dataclass
class AdvBatch:
    """Adversarial examples plus the provenance needed to detect drift."""

    indices: list[int] = field(default_factory=list)
    adversarials: list[np.ndarray] = field(default_factory=list)
    fingerprint: str = "0" * 64
    seed: int = 0

    def __post_init__(self):
        if len(self.indices) != len(self.adversarials):
            raise FormatError(f"{len(self.indices)} indices for "
                              f"{len(self.adversarials)} adversarial tensors")

    def __len__(self) -> int:
        return len(self.indices)

    def stacked(self) -> np.ndarray:
        return np.stack(self.adversarials) if self.adversarials else np.zeros((0,))


def _fingerprint_of(expected) -> str:
    if hasattr(expected, "fingerprint"):
        return expected.fingerprint()
    return str(expected)


def save_adv_batch(batch: AdvBatch, path: str):
    try:
        digest = bytes.fromhex(batch.fingerprint)
    except ValueError:
        digest = b""
    if len(digest) != 32:
        raise FormatError(f"Fingerprint must be a SHA-256 hex digest, got '{batch.fingerprint}'")
    parts = [MAGIC, struct.pack("<I", VERSION), digest,
             struct.pack("<QI", int(batch.seed) & ((1 << 64) - 1), len(batch))]
    for index, tensor in zip(batch.indices, batch.adversarials):
        parts.append(struct.pack("<Q", int(index)))
        parts.append(encode_tensor(tensor))

    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "wb") as f:
        f.write(append_checksum(b"".join(parts)))
    logger.info(f"Saved {len(batch)} adversarial examples to {path}")


def load_adv_batch(path: str, expected=None) -> AdvBatch:
    """
    Load a GADV file. ``expected`` may be an AttackConfig (anything with a
    ``fingerprint()`` method) or a hex digest; a mismatch raises DriftError.
    """
    with open(path, "rb") as f:
        reader = ByteReader(f.read(), os.path.basename(path))

    magic = reader.read(4)
    if magic != MAGIC:
        raise FormatError(f"{reader.what}: bad magic {magic!r} (expected {MAGIC!r})")
    version = reader.unpack("<I")
    if version != VERSION:
        raise VersionError(f"{reader.what}: unsupported GADV version {version}")
    fingerprint = reader.read(32).hex()
    seed, count = reader.unpack("<QI")

    indices = []
    adversarials = []
    for _ in range(count):
        indices.append(reader.unpack("<Q"))
        adversarials.append(decode_tensor(reader))
    verify_checksum(reader)

    if expected is not None:
        wanted = _fingerprint_of(expected)
        if wanted != fingerprint:
            raise DriftError(f"{reader.what}: config fingerprint {fingerprint[:12]}… "
                             f"does not match expected {wanted[:12]}…")
    return AdvBatch(indices, adversarials, fingerprint, seed)
