"""Weight quantization and the ``.coin`` container.

File layout, little-endian::

    0-3    magic b"COIN"
    4      format version (1)
    5      bits per parameter (16 or 32)
    6-7    hidden layers (u16)
    8-9    width (u16)
    10-13  sine frequency scale (f32)
    14-17  image width (u32)
    18-21  image height (u32)
    22-23  reserved, zero
    24-    param_count values (IEEE binary16 or binary32), layer by layer,
           each layer's weight matrix row-major followed by its bias

No entropy coding is applied; the payload size is fixed by the header.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .siren import Architecture, ContractError, SirenNetwork

MAGIC = b"COIN"
VERSION = 1
HEADER = struct.Struct("<4sBBHHfII2x")
HEADER_SIZE = HEADER.size
SUPPORTED_BITS = (16, 32)
FP16_MAX = float(np.finfo(np.float16).max)

_STORAGE_DTYPE = {16: np.dtype("<f2"), 32: np.dtype("<f4")}


class CoinFormatError(ValueError):
    """Base class for malformed ``.coin`` data; ``code`` identifies the failure."""

    code = 10


class BadMagicError(CoinFormatError):
    code = 11


class UnsupportedVersionError(CoinFormatError):
    code = 12


class TruncatedPayloadError(CoinFormatError):
    code = 13


class LengthMismatchError(CoinFormatError):
    code = 14


class UnsupportedPrecisionError(CoinFormatError):
    code = 15


@dataclass
class QuantizedModel:
    arch: Architecture
    precision_bits: int
    payload: np.ndarray

    def __post_init__(self):
        if self.precision_bits not in SUPPORTED_BITS:
            raise UnsupportedPrecisionError(
                f"precision {self.precision_bits} bits not supported (use 16 or 32)"
            )
        self.payload = np.asarray(self.payload, dtype=_STORAGE_DTYPE[self.precision_bits])
        if self.payload.ndim != 1 or self.payload.size != self.arch.param_count:
            raise LengthMismatchError(
                f"payload holds {self.payload.size} values, {self.arch} needs {self.arch.param_count}"
            )

    def __eq__(self, other):
        if not isinstance(other, QuantizedModel):
            return NotImplemented
        return (
            self.arch == other.arch
            and self.precision_bits == other.precision_bits
            and self.payload.tobytes() == other.payload.tobytes()
        )


def to_half(values) -> np.ndarray:
    """Round to IEEE binary16 (nearest, ties to even), saturating at +-65504."""
    values = np.asarray(values, dtype=np.float64)
    return np.clip(values, -FP16_MAX, FP16_MAX).astype(np.float16)


def quantize(net: SirenNetwork, precision_bits: int = 16) -> QuantizedModel:
    flat = net.flatten()
    if precision_bits == 16:
        payload = to_half(flat)
    elif precision_bits == 32:
        payload = flat.astype(np.float32)
    else:
        raise UnsupportedPrecisionError(f"precision {precision_bits} bits not supported")
    return QuantizedModel(net.arch, precision_bits, payload)


def dequantize(q: QuantizedModel, dtype=np.float32) -> SirenNetwork:
    return SirenNetwork.from_flat(q.arch, q.payload.astype(np.float64), dtype=dtype)


def bpp(arch: Architecture, precision_bits: int, image_w: int, image_h: int) -> float:
    """Bits per pixel: parameters x bits per parameter / pixels."""
    if image_w < 1 or image_h < 1:
        raise ContractError(f"image dimensions must be positive, got {image_w}x{image_h}")
    return arch.param_count * precision_bits / (image_w * image_h)


def file_size(arch: Architecture, precision_bits: int) -> int:
    return HEADER_SIZE + arch.param_count * precision_bits // 8


def to_bytes(q: QuantizedModel, image_dims: tuple[int, int]) -> bytes:
    arch = q.arch
    if arch.hidden_layers > 0xFFFF or arch.width > 0xFFFF:
        raise ContractError(f"{arch} does not fit the 16-bit header fields")
    w, h = image_dims
    header = HEADER.pack(
        MAGIC, VERSION, q.precision_bits, arch.hidden_layers, arch.width,
        arch.freq_scale, w, h,
    )
    return header + q.payload.tobytes()


def parse_header(data: bytes) -> tuple[Architecture, int, tuple[int, int]]:
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagicError(f"bad magic {bytes(data[:4])!r}, expected {MAGIC!r}")
    if len(data) < HEADER_SIZE:
        raise TruncatedPayloadError(f"header truncated at {len(data)} bytes")
    magic, version, bits, layers, width, freq, w, h = HEADER.unpack_from(data)
    if version != VERSION:
        raise UnsupportedVersionError(f"format version {version} not supported")
    if bits not in SUPPORTED_BITS:
        raise UnsupportedPrecisionError(f"precision {bits} bits not supported")
    if data[22:24] != b"\x00\x00":
        raise CoinFormatError("reserved header bytes are not zero")
    try:
        arch = Architecture(layers, width, float(freq))
    except ContractError as exc:
        raise CoinFormatError(f"invalid architecture in header: {exc}") from exc
    return arch, bits, (w, h)


def from_bytes(data: bytes) -> tuple[QuantizedModel, tuple[int, int]]:
    arch, bits, dims = parse_header(data)
    expected = file_size(arch, bits)
    if len(data) < expected:
        raise TruncatedPayloadError(f"payload truncated: {len(data)} bytes, header implies {expected}")
    if len(data) > expected:
        raise LengthMismatchError(f"{len(data) - expected} trailing bytes after payload")
    payload = np.frombuffer(data, dtype=_STORAGE_DTYPE[bits], offset=HEADER_SIZE)
    return QuantizedModel(arch, bits, payload.copy()), dims


def write_coin(q: QuantizedModel, image_dims: tuple[int, int], path) -> int:
    data = to_bytes(q, image_dims)
    Path(path).write_bytes(data)
    return len(data)


def read_coin(path) -> tuple[QuantizedModel, tuple[int, int]]:
    return from_bytes(Path(path).read_bytes())
