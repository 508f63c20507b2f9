"""Minimal protobuf wire-format primitives.

Only the subset needed to read and write ONNX model files: varints,
length-delimited fields, and 32-bit floats. No schema compiler involved;
message layouts live in :mod:`qonnx2graph.model`.
"""

from __future__ import annotations

import struct
from typing import Iterator

VARINT = 0
FIXED64 = 1
LENGTH = 2
FIXED32 = 5


class WireError(ValueError):
    """Raised when a buffer is not valid protobuf wire data."""


def read_varint(data: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if pos >= len(data):
            raise WireError("truncated varint")
        byte = data[pos]
        pos += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, pos
        shift += 7
        if shift > 63:
            raise WireError("varint too long")


def iter_fields(data: bytes) -> Iterator[tuple[int, int, bytes | int]]:
    """Yield ``(field_number, wire_type, value)`` for each field in a message.

    Length-delimited values are returned as ``bytes``; varints as ``int``;
    fixed-width values as raw ``bytes`` of the appropriate size.
    """
    pos = 0
    while pos < len(data):
        key, pos = read_varint(data, pos)
        field, wtype = key >> 3, key & 0x7
        if wtype == VARINT:
            value, pos = read_varint(data, pos)
        elif wtype == LENGTH:
            size, pos = read_varint(data, pos)
            if pos + size > len(data):
                raise WireError("truncated length-delimited field")
            value = data[pos:pos + size]
            pos += size
        elif wtype == FIXED32:
            if pos + 4 > len(data):
                raise WireError("truncated fixed32")
            value = data[pos:pos + 4]
            pos += 4
        elif wtype == FIXED64:
            if pos + 8 > len(data):
                raise WireError("truncated fixed64")
            value = data[pos:pos + 8]
            pos += 8
        else:
            raise WireError(f"unsupported wire type {wtype}")
        yield field, wtype, value


def to_signed64(value: int) -> int:
    """Interpret a decoded varint as a two's-complement int64."""
    return value - (1 << 64) if value >= (1 << 63) else value


def unpack_varints(payload: bytes) -> list[int]:
    """Decode a packed repeated varint payload."""
    out = []
    pos = 0
    while pos < len(payload):
        v, pos = read_varint(payload, pos)
        out.append(v)
    return out


# --- encoding ---------------------------------------------------------------

def encode_varint(value: int) -> bytes:
    if value < 0:
        value += 1 << 64
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def tag(field: int, wtype: int) -> bytes:
    return encode_varint((field << 3) | wtype)


def varint_field(field: int, value: int) -> bytes:
    return tag(field, VARINT) + encode_varint(value)


def bytes_field(field: int, payload: bytes) -> bytes:
    return tag(field, LENGTH) + encode_varint(len(payload)) + payload


def string_field(field: int, text: str) -> bytes:
    return bytes_field(field, text.encode("utf-8"))


def float_field(field: int, value: float) -> bytes:
    return tag(field, FIXED32) + struct.pack("<f", value)
