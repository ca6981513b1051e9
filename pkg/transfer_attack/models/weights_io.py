"""
GATK weight files.

Layout (little-endian): magic "GATK", version u32, tensor count u32, then per
tensor: name length u32, UTF-8 name, rank u32, dims u64 each, float64
payload. A CRC32 of all preceding bytes closes the file.
"""

import os
import struct
import logging
from typing import Optional

from ..data.binary import ByteReader, append_checksum, decode_tensor, encode_tensor, verify_checksum
from ..errors import FormatError, ShapeError, VersionError
from .architectures import Classifier, ModelSpec, Weights, infer_spec

logger = logging.getLogger(__name__)

MAGIC = b"GATK"
VERSION = 1


def encode_weights(weights: Weights) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(weights))]
    for name, tensor in weights.items():
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<I", len(encoded)))
        parts.append(encoded)
        parts.append(encode_tensor(tensor))
    return append_checksum(b"".join(parts))


def decode_weights(data: bytes, what: str = "weights") -> Weights:
    reader = ByteReader(data, what)
    magic = reader.read(4)
    if magic != MAGIC:
        raise FormatError(f"{what}: bad magic {magic!r} (expected {MAGIC!r})")
    version, count = reader.unpack("<II")
    if version != VERSION:
        raise VersionError(f"{what}: unsupported GATK version {version} (expected {VERSION})")

    weights: Weights = {}
    for _ in range(count):
        length = reader.unpack("<I")
        try:
            name = reader.read(length).decode("utf-8")
        except UnicodeDecodeError as e:
            raise FormatError(f"{what}: tensor name is not UTF-8 ({e})") from e
        weights[name] = decode_tensor(reader)
    verify_checksum(reader)
    return weights


def save_weights(weights: Weights, path: str):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "wb") as f:
        f.write(encode_weights(weights))
    logger.info(f"Saved {len(weights)} tensors to {path}")


def load_weights(path: str, expected: Optional[ModelSpec] = None) -> Weights:
    """
    Read a GATK file. With ``expected``, the tensor count and every shape
    must match that spec or ShapeError is raised.
    """
    with open(path, "rb") as f:
        weights = decode_weights(f.read(), what=os.path.basename(path))

    if expected is not None:
        shapes = expected.parameter_shapes()
        if len(weights) != len(shapes):
            raise ShapeError(f"{path}: {len(weights)} tensors, "
                             f"{expected.arch} needs {len(shapes)}")
        for name, shape in shapes.items():
            if name not in weights:
                raise ShapeError(f"{path}: missing tensor '{name}'")
            if tuple(weights[name].shape) != shape:
                raise ShapeError(f"{path}: tensor '{name}' has shape "
                                 f"{weights[name].shape}, expected {shape}")
    return weights


def save_classifier(model: Classifier, path: str):
    save_weights(model.weights, path)


def load_classifier(path: str, expected: Optional[ModelSpec] = None) -> Classifier:
    """Load a self-describing GATK file into a Classifier named after the file."""
    weights = load_weights(path, expected)
    spec = expected or infer_spec(weights)
    name = os.path.splitext(os.path.basename(path))[0]
    return Classifier(spec, weights, name=name)
