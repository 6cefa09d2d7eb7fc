"""Canonical binary encoding shared by the ledgers and the off-chain store.

All digests in the system are computed over these bytes, so the encoding
must be byte-deterministic: map keys are sorted by their UTF-8 bytes,
integers use a fixed 8-byte width, and floats are not representable.
"""

from __future__ import annotations

import hashlib
from typing import Any

DIGEST_SIZE = 32
ZERO_DIGEST = b"\x00" * DIGEST_SIZE

_TAG_NONE = 0x4E   # 'N'
_TAG_TRUE = 0x54   # 'T'
_TAG_FALSE = 0x46  # 'F'
_TAG_INT = 0x49    # 'I'
_TAG_BYTES = 0x42  # 'B'
_TAG_STR = 0x53    # 'S'
_TAG_LIST = 0x4C   # 'L'
_TAG_DICT = 0x44   # 'D'

_INT_MIN = -(1 << 63)
_INT_MAX = (1 << 63) - 1


class EncodingError(ValueError):
    """Value cannot be canonically encoded, or bytes do not decode."""


def encode(value: Any) -> bytes:
    """Encode a value (None, bool, int, bytes, str, list/tuple, dict) canonically."""
    out = bytearray()
    _encode_into(out, value)
    return bytes(out)


def _encode_into(out: bytearray, value: Any) -> None:
    if value is None:
        out.append(_TAG_NONE)
    elif value is True:
        out.append(_TAG_TRUE)
    elif value is False:
        out.append(_TAG_FALSE)
    elif isinstance(value, int):
        if not _INT_MIN <= value <= _INT_MAX:
            raise EncodingError(f"integer out of 64-bit range: {value}")
        out.append(_TAG_INT)
        out.extend(value.to_bytes(8, "big", signed=True))
    elif isinstance(value, (bytes, bytearray)):
        out.append(_TAG_BYTES)
        out.extend(len(value).to_bytes(4, "big"))
        out.extend(value)
    elif isinstance(value, str):
        raw = value.encode("utf-8")
        out.append(_TAG_STR)
        out.extend(len(raw).to_bytes(4, "big"))
        out.extend(raw)
    elif isinstance(value, (list, tuple)):
        out.append(_TAG_LIST)
        out.extend(len(value).to_bytes(4, "big"))
        for item in value:
            _encode_into(out, item)
    elif isinstance(value, dict):
        keys = list(value.keys())
        if not all(isinstance(k, str) for k in keys):
            raise EncodingError("dict keys must be strings")
        encoded_keys = sorted(k.encode("utf-8") for k in keys)
        if len(set(encoded_keys)) != len(encoded_keys):
            raise EncodingError("duplicate dict keys after encoding")
        out.append(_TAG_DICT)
        out.extend(len(value).to_bytes(4, "big"))
        for raw_key in encoded_keys:
            out.append(_TAG_STR)
            out.extend(len(raw_key).to_bytes(4, "big"))
            out.extend(raw_key)
            _encode_into(out, value[raw_key.decode("utf-8")])
    else:
        raise EncodingError(f"unencodable type: {type(value).__name__}")


def decode(data: bytes) -> Any:
    """Decode canonical bytes back into a value; the full buffer must be consumed."""
    value, offset = _decode_at(data, 0)
    if offset != len(data):
        raise EncodingError(f"trailing bytes after value ({len(data) - offset})")
    return value


def _decode_at(data: bytes, offset: int) -> tuple[Any, int]:
    if offset >= len(data):
        raise EncodingError("truncated value")
    tag = data[offset]
    offset += 1
    if tag == _TAG_NONE:
        return None, offset
    if tag == _TAG_TRUE:
        return True, offset
    if tag == _TAG_FALSE:
        return False, offset
    if tag == _TAG_INT:
        end = offset + 8
        if end > len(data):
            raise EncodingError("truncated integer")
        return int.from_bytes(data[offset:end], "big", signed=True), end
    if tag in (_TAG_BYTES, _TAG_STR):
        if offset + 4 > len(data):
            raise EncodingError("truncated length prefix")
        length = int.from_bytes(data[offset:offset + 4], "big")
        offset += 4
        end = offset + length
        if end > len(data):
            raise EncodingError("truncated payload")
        raw = data[offset:end]
        if tag == _TAG_BYTES:
            return bytes(raw), end
        try:
            return raw.decode("utf-8"), end
        except UnicodeDecodeError as exc:
            raise EncodingError("invalid utf-8 in string") from exc
    if tag == _TAG_LIST:
        if offset + 4 > len(data):
            raise EncodingError("truncated length prefix")
        count = int.from_bytes(data[offset:offset + 4], "big")
        offset += 4
        items = []
        for _ in range(count):
            item, offset = _decode_at(data, offset)
            items.append(item)
        return items, offset
    if tag == _TAG_DICT:
        if offset + 4 > len(data):
            raise EncodingError("truncated length prefix")
        count = int.from_bytes(data[offset:offset + 4], "big")
        offset += 4
        result: dict[str, Any] = {}
        prev_key: bytes | None = None
        for _ in range(count):
            key, offset = _decode_at(data, offset)
            if not isinstance(key, str):
                raise EncodingError("dict key is not a string")
            raw_key = key.encode("utf-8")
            if prev_key is not None and raw_key <= prev_key:
                raise EncodingError("dict keys not in canonical order")
            prev_key = raw_key
            value, offset = _decode_at(data, offset)
            result[key] = value
        return result, offset
    raise EncodingError(f"unknown tag byte 0x{tag:02x}")


def digest(value: Any) -> bytes:
    """SHA-256 digest of the canonical encoding of a value."""
    return hashlib.sha256(encode(value)).digest()


def digest_bytes(raw: bytes) -> bytes:
    """SHA-256 digest over raw bytes (already-encoded payloads)."""
    return hashlib.sha256(raw).digest()
