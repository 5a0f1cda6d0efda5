"""Deterministic CBOR profile used for hashing and interchange.

Definite lengths only, shortest-form headers, text map keys sorted by
(byte length, bytes), no floats, CIDs as tag 42 over ``0x00 || cid``.
The decoder is strict: it rejects anything the encoder would not emit,
so ``encode(decode(b)) == b`` for every accepted ``b``.
"""
from __future__ import annotations

from .cid import Cid
from ..errors import DecodeError, UnsupportedValue

CID_TAG = 42
_MAX_UINT = 2**64 - 1


def _head(major: int, n: int) -> bytes:
    if n < 24:
        return bytes([major << 5 | n])
    if n < 0x100:
        return bytes([major << 5 | 24, n])
    if n < 0x10000:
        return bytes([major << 5 | 25]) + n.to_bytes(2, "big")
    if n < 0x100000000:
        return bytes([major << 5 | 26]) + n.to_bytes(4, "big")
    return bytes([major << 5 | 27]) + n.to_bytes(8, "big")


def _key_order(k: bytes):
    return (len(k), k)


def _encode(value, out: bytearray) -> None:
    if value is True:
        out.append(0xF5)
    elif value is False:
        out.append(0xF4)
    elif value is None:
        out.append(0xF6)
    elif isinstance(value, int):
        if value >= 0:
            if value > _MAX_UINT:
                raise UnsupportedValue("integer exceeds 64 bits")
            out += _head(0, value)
        else:
            if -1 - value > _MAX_UINT:
                raise UnsupportedValue("integer exceeds 64 bits")
            out += _head(1, -1 - value)
    elif isinstance(value, (bytes, bytearray, memoryview)):
        value = bytes(value)
        out += _head(2, len(value))
        out += value
    elif isinstance(value, str):
        raw = value.encode("utf-8")
        out += _head(3, len(raw))
        out += raw
    elif isinstance(value, Cid):
        raw = b"\x00" + value.to_bytes()
        out += _head(6, CID_TAG)
        out += _head(2, len(raw))
        out += raw
    elif isinstance(value, (list, tuple)):
        out += _head(4, len(value))
        for item in value:
            _encode(item, out)
    elif isinstance(value, dict):
        items = []
        for k, v in value.items():
            if not isinstance(k, str):
                raise UnsupportedValue(f"map keys must be text, got {type(k).__name__}")
            items.append((k.encode("utf-8"), v))
        items.sort(key=lambda kv: _key_order(kv[0]))
        out += _head(5, len(items))
        for k, v in items:
            out += _head(3, len(k))
            out += k
            _encode(v, out)
    elif isinstance(value, float):
        raise UnsupportedValue("floating-point values are not allowed")
    else:
        raise UnsupportedValue(f"cannot serialize {type(value).__name__}")


def canonical_serialize(value) -> bytes:
    """Serialize ``value`` to its unique canonical byte string."""
    out = bytearray()
    _encode(value, out)
    return bytes(out)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise DecodeError("truncated input")
        chunk = self.buf[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def head(self) -> tuple[int, int]:
        ib = self.take(1)[0]
        major, info = ib >> 5, ib & 0x1F
        if major == 7:
            return major, info
        if info < 24:
            return major, info
        if info > 27:
            raise DecodeError("indefinite or reserved length")
        size = 1 << (info - 24)
        n = int.from_bytes(self.take(size), "big")
        minimal = {24: 24, 25: 0x100, 26: 0x10000, 27: 0x100000000}[info]
        if n < minimal:
            raise DecodeError("non-minimal integer encoding")
        return major, n

    def value(self, depth=0):
        if depth > 64:
            raise DecodeError("nesting too deep")
        major, n = self.head()
        if major == 0:
            return n
        if major == 1:
            return -1 - n
        if major == 2:
            return bytes(self.take(n))
        if major == 3:
            try:
                return self.take(n).decode("utf-8")
            except UnicodeDecodeError:
                raise DecodeError("invalid utf-8 text") from None
        if major == 4:
            return [self.value(depth + 1) for _ in range(n)]
        if major == 5:
            out = {}
            prev = None
            for _ in range(n):
                kmaj, klen = self.head()
                if kmaj != 3:
                    raise DecodeError("map keys must be text")
                kraw = bytes(self.take(klen))
                if prev is not None and _key_order(kraw) <= _key_order(prev):
                    raise DecodeError("map keys not in canonical order")
                prev = kraw
                out[kraw.decode("utf-8")] = self.value(depth + 1)
            return out
        if major == 6:
            if n != CID_TAG:
                raise DecodeError(f"unsupported tag {n}")
            inner = self.value(depth + 1)
            if not isinstance(inner, bytes) or not inner.startswith(b"\x00"):
                raise DecodeError("malformed CID link")
            return Cid.from_bytes(inner[1:])
        if major == 7:
            if n == 20:
                return False
            if n == 21:
                return True
            if n == 22:
                return None
            raise DecodeError("floats and other simple values are not allowed")
        raise DecodeError(f"unknown major type {major}")


def canonical_parse(buf: bytes):
    """Strict inverse of :func:`canonical_serialize`."""
    reader = _Reader(bytes(buf))
    value = reader.value()
    if reader.pos != len(reader.buf):
        raise DecodeError("trailing bytes after value")
    return value


def encode_real(x: float) -> str:
    """Exact text encoding for a float inside a record (floats are banned)."""
    return float(x).hex()


def decode_real(s: str) -> float:
    return float.fromhex(s)
