"""
Little-endian record helpers shared by the GATK weight format and the GADV
adversarial-batch format.

Tensor record: rank u32, dims u64 each, payload float64 little-endian.
Files end with a CRC32 (u32) of every preceding byte.
"""

import math
import struct
import zlib

import numpy as np

from ..errors import FormatError, TruncationError


class ByteReader:
    """Bounds-checked cursor over an in-memory file."""

    def __init__(self, data: bytes, what: str):
        self.data = data
        self.what = what
        self.offset = 0

    def read(self, n: int) -> bytes:
        end = self.offset + n
        if end > len(self.data):
            raise TruncationError(self.what, end, len(self.data))
        chunk = self.data[self.offset:end]
        self.offset = end
        return chunk

    def unpack(self, fmt: str):
        values = struct.unpack(fmt, self.read(struct.calcsize(fmt)))
        return values[0] if len(values) == 1 else values

    @property
    def remaining(self) -> int:
        return len(self.data) - self.offset


def encode_tensor(array: np.ndarray) -> bytes:
    array = np.ascontiguousarray(array, dtype="<f8")
    parts = [struct.pack("<I", array.ndim)]
    parts.extend(struct.pack("<Q", d) for d in array.shape)
    parts.append(array.tobytes())
    return b"".join(parts)


def decode_tensor(reader: ByteReader) -> np.ndarray:
    rank = reader.unpack("<I")
    if 8 * rank > reader.remaining:
        raise TruncationError(reader.what, reader.offset + 8 * rank, len(reader.data))
    dims = tuple(reader.unpack("<Q") for _ in range(rank))
    count = math.prod(dims)
    if 8 * count > reader.remaining:
        raise TruncationError(reader.what, reader.offset + 8 * count, len(reader.data))
    payload = reader.read(8 * count)
    try:
        return np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(dims)
    except (ValueError, OverflowError) as e:
        raise FormatError(f"{reader.what}: cannot build a tensor of shape {dims}: {e}") from e


def append_checksum(body: bytes) -> bytes:
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def verify_checksum(reader: ByteReader):
    """Read the trailing CRC32, which must be the last 4 bytes of the file."""
    body_end = reader.offset
    stored = reader.unpack("<I")
    if reader.remaining:
        raise TruncationError(reader.what, reader.offset, len(reader.data))
    actual = zlib.crc32(reader.data[:body_end]) & 0xFFFFFFFF
    if stored != actual:
        raise FormatError(f"{reader.what}: checksum mismatch "
                          f"(stored 0x{stored:08x}, computed 0x{actual:08x})")
