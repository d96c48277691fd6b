"""Little building blocks for the archive wire format.

Unsigned integers use LEB128 varints (7 payload bits per byte, high
bit set on every byte except the last).  Floats travel as IEEE 754
single precision, little endian, which is also the storage precision
of all model parameters.  Strings and blobs are varint length-prefixed.
"""

from __future__ import annotations

import struct
from io import BytesIO


class WireError(Exception):
    """Truncated or malformed serialized data."""


def write_uvarint(out: BytesIO, value: int) -> None:
    if value < 0:
        raise WireError("varints are unsigned")
    while True:
        b = value & 0x7F
        value >>= 7
        if value:
            out.write(bytes([b | 0x80]))
        else:
            out.write(bytes([b]))
            return


def read_uvarint(src: BytesIO) -> int:
    result = 0
    shift = 0
    while True:
        raw = src.read(1)
        if not raw:
            raise WireError("truncated varint")
        b = raw[0]
        result |= (b & 0x7F) << shift
        if not b & 0x80:
            return result
        shift += 7
        if shift > 63:
            raise WireError("varint too long")


def write_f32(out: BytesIO, value: float) -> None:
    out.write(struct.pack("<f", value))


def read_f32(src: BytesIO) -> float:
    raw = src.read(4)
    if len(raw) != 4:
        raise WireError("truncated float")
    return struct.unpack("<f", raw)[0]


def write_f64(out: BytesIO, value: float) -> None:
    out.write(struct.pack("<d", value))


def read_f64(src: BytesIO) -> float:
    raw = src.read(8)
    if len(raw) != 8:
        raise WireError("truncated double")
    return struct.unpack("<d", raw)[0]


def write_blob(out: BytesIO, data: bytes) -> None:
    write_uvarint(out, len(data))
    out.write(data)


def read_blob(src: BytesIO) -> bytes:
    n = read_uvarint(src)
    raw = src.read(n)
    if len(raw) != n:
        raise WireError("truncated blob")
    return raw


def write_text(out: BytesIO, s: str) -> None:
    write_blob(out, s.encode("utf-8"))


def read_text(src: BytesIO) -> str:
    try:
        return read_blob(src).decode("utf-8")
    except UnicodeDecodeError as e:
        raise WireError("invalid text encoding") from e


def f32(value: float) -> float:
    """Round a float to its nearest single-precision neighbour."""
    return struct.unpack("<f", struct.pack("<f", value))[0]
