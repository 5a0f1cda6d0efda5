"""Content identifiers (CIDv1) over SHA3-512 and the DAG-CBOR codec."""
from __future__ import annotations

import base64
import hashlib
from dataclasses import dataclass

from ..errors import DecodeError, UnsupportedAlgorithm

DAG_CBOR = 0x71
RAW = 0x55
SHA3_512 = 0x14
SHA2_256 = 0x12

_HASHES = {
    SHA3_512: (hashlib.sha3_512, 64),
    SHA2_256: (hashlib.sha256, 32),
}
_HASH_NAMES = {"sha3-512": SHA3_512, "sha2-256": SHA2_256}
_CODEC_NAMES = {"dag-cbor": DAG_CBOR, "raw": RAW}


def _varint(n: int) -> bytes:
    out = bytearray()
    while True:
        b = n & 0x7F
        n >>= 7
        if n:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def _read_varint(buf: bytes, pos: int) -> tuple[int, int]:
    n = shift = 0
    while True:
        if pos >= len(buf):
            raise DecodeError("truncated varint in CID")
        b = buf[pos]
        pos += 1
        n |= (b & 0x7F) << shift
        if not b & 0x80:
            return n, pos
        shift += 7
        if shift > 63:
            raise DecodeError("varint too long")


def _lookup(value, table, what):
    if isinstance(value, str):
        try:
            return table[value]
        except KeyError:
            raise UnsupportedAlgorithm(f"unsupported {what}: {value}") from None
    return value


@dataclass(frozen=True)
class Cid:
    """Self-describing hash reference to serialized bytes."""

    version: int
    codec: int
    hash_alg: int
    digest: bytes

    def __post_init__(self):
        if self.hash_alg not in _HASHES:
            raise UnsupportedAlgorithm(f"unsupported hash code 0x{self.hash_alg:x}")
        if len(self.digest) != _HASHES[self.hash_alg][1]:
            raise DecodeError("digest length does not match hash algorithm")
        if self.version != 1:
            raise DecodeError("only CIDv1 is supported")

    def to_bytes(self) -> bytes:
        return (
            _varint(self.version)
            + _varint(self.codec)
            + _varint(self.hash_alg)
            + _varint(len(self.digest))
            + self.digest
        )

    @classmethod
    def from_bytes(cls, buf: bytes) -> "Cid":
        version, pos = _read_varint(buf, 0)
        codec, pos = _read_varint(buf, pos)
        alg, pos = _read_varint(buf, pos)
        size, pos = _read_varint(buf, pos)
        digest = bytes(buf[pos:])
        if len(digest) != size:
            raise DecodeError("CID digest length mismatch")
        return cls(version, codec, alg, digest)

    def encode(self) -> str:
        """Multibase base32-lower text form (prefix ``b``, no padding)."""
        text = base64.b32encode(self.to_bytes()).decode("ascii").rstrip("=")
        return "b" + text.lower()

    @classmethod
    def parse(cls, text: str) -> "Cid":
        if not text or text[0] != "b":
            raise DecodeError("expected multibase base32 CID starting with 'b'")
        body = text[1:].upper()
        body += "=" * (-len(body) % 8)
        try:
            raw = base64.b32decode(body)
        except Exception as exc:  # binascii.Error
            raise DecodeError(f"bad base32 CID: {exc}") from None
        return cls.from_bytes(raw)

    def matches(self, data: bytes) -> bool:
        return _HASHES[self.hash_alg][0](data).digest() == self.digest

    def __str__(self) -> str:
        return self.encode()

    def __repr__(self) -> str:
        return f"Cid({self.encode()!r})"

    def __lt__(self, other: "Cid") -> bool:
        return self.encode() < other.encode()


def compute_cid(data: bytes, hash_alg="sha3-512", codec="dag-cbor") -> Cid:
    """Hash ``data`` and wrap the digest as a CIDv1."""
    alg = _lookup(hash_alg, _HASH_NAMES, "hash algorithm")
    codec = _lookup(codec, _CODEC_NAMES, "codec")
    if alg not in _HASHES:
        raise UnsupportedAlgorithm(f"unsupported hash code 0x{alg:x}")
    if not data:
        raise ValueError("cannot address empty bytes")
    return Cid(1, codec, alg, _HASHES[alg][0](data).digest())
