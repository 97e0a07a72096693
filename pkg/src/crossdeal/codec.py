"""Canonical binary encoding and digests.

Every signed or hashed object in the system (transactions, log records,
transfer plans, state digests) goes through this one encoding so that two
components computing a digest of "the same thing" always get the same bytes.

Encoding rules (length prefixes are 4-byte big-endian unsigned):
  None        -> b"N"
  bool        -> b"T" / b"F"
  int         -> b"i" + len + ascii decimal (arbitrary precision)
  bytes       -> b"b" + len + raw
  str         -> b"s" + len + utf-8
  list/tuple  -> b"l" + count + encoded items
  dict        -> b"d" + count + (encoded key + encoded value), keys sorted

Dict keys must be strings. Any other type is a hard error: callers convert
domain objects to plain structures first.
"""

from __future__ import annotations

import hashlib
import struct


def _u32(n: int) -> bytes:
    return struct.pack(">I", n)


def encode(value) -> bytes:
    """Encode a plain value canonically. Raises TypeError on foreign types."""
    if value is None:
        return b"N"
    if value is True:
        return b"T"
    if value is False:
        return b"F"
    if isinstance(value, int):
        digits = str(value).encode("ascii")
        return b"i" + _u32(len(digits)) + digits
    if isinstance(value, bytes):
        return b"b" + _u32(len(value)) + value
    if isinstance(value, str):
        raw = value.encode("utf-8")
        return b"s" + _u32(len(raw)) + raw
    if isinstance(value, (list, tuple)):
        parts = [b"l", _u32(len(value))]
        parts.extend(encode(item) for item in value)
        return b"".join(parts)
    if isinstance(value, dict):
        keys = sorted(value.keys())
        parts = [b"d", _u32(len(keys))]
        for key in keys:
            if not isinstance(key, str):
                raise TypeError(f"dict keys must be str, got {type(key).__name__}")
            parts.append(encode(key))
            parts.append(encode(value[key]))
        return b"".join(parts)
    raise TypeError(f"cannot canonically encode {type(value).__name__}")


def digest(value) -> bytes:
    """32-byte digest of the canonical encoding."""
    return hashlib.sha256(encode(value)).digest()


def hexdigest(value) -> str:
    return digest(value).hex()


def hash_bytes(raw: bytes) -> bytes:
    return hashlib.sha256(raw).digest()
