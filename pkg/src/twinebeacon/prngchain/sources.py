"""Local randomness sources for the PRNG chain."""
from __future__ import annotations

import hashlib
import os
import secrets
import threading
from typing import Protocol

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms

from ..errors import SourceUnavailable
from ..rsaprng.prng import RsaPrng

BLOCK = 64


class EntropySource(Protocol):
    name: str

    def read(self, nbytes: int = BLOCK) -> bytes: ...


class SystemSource:
    """The operating system CSPRNG."""

    name = "system"

    def read(self, nbytes: int = BLOCK) -> bytes:
        return secrets.token_bytes(nbytes)


class ChaChaSource:
    """An independent ChaCha20 keystream generator, keyed once at start."""

    name = "chacha20"

    def __init__(self, key: bytes | None = None):
        self._key = key or os.urandom(32)
        self._counter = 0
        self._lock = threading.Lock()

    def read(self, nbytes: int = BLOCK) -> bytes:
        with self._lock:
            # 16-byte nonce: 4-byte block counter then 12-byte nonce, both from our counter
            nonce = self._counter.to_bytes(16, "little")
            self._counter += 1 << 32
        enc = Cipher(algorithms.ChaCha20(self._key, nonce), mode=None).encryptor()
        return enc.update(bytes(nbytes))


class DeviceSource:
    """A hardware entropy device, read as a file."""

    def __init__(self, path: str = "/dev/hwrng"):
        self.path = path
        self.name = f"device:{path}"

    def read(self, nbytes: int = BLOCK) -> bytes:
        try:
            with open(self.path, "rb", buffering=0) as fh:
                data = fh.read(nbytes)
        except OSError as exc:
            raise SourceUnavailable(f"{self.path}: {exc}") from None
        if len(data) != nbytes:
            raise SourceUnavailable(f"{self.path}: short read")
        return data


def external_source(path: str = "/dev/hwrng") -> EntropySource:
    """The hardware device when readable, else an independent ChaCha20 instance."""
    dev = DeviceSource(path)
    try:
        dev.read(1)
        return dev
    except SourceUnavailable:
        return ChaChaSource()


class RsaSource:
    name = "rsaprng"

    def __init__(self, prng: RsaPrng):
        self.prng = prng

    def read(self, nbytes: int = BLOCK) -> bytes:
        return self.prng.block(nbytes)


class FixedSource:
    """Replays a fixed sequence of blocks; for test vectors."""

    def __init__(self, blocks, name: str = "fixed"):
        self._blocks = list(blocks)
        self.name = name

    def read(self, nbytes: int = BLOCK) -> bytes:
        if not self._blocks:
            raise SourceUnavailable(f"{self.name} exhausted")
        out = self._blocks.pop(0)
        if len(out) != nbytes:
            raise SourceUnavailable(f"{self.name}: wrong block size")
        return out


def combine_sources(s1: bytes, s2: bytes, s3: bytes) -> bytes:
    """SHA3-512(s1 || s2 || s3) of three 64-byte blocks."""
    for s in (s1, s2, s3):
        if len(s) != BLOCK:
            raise ValueError("each source block must be 64 bytes")
    return hashlib.sha3_512(s1 + s2 + s3).digest()


def read_all(sources) -> tuple[bytes, dict]:
    """Fresh local randomness from exactly three sources, plus their names."""
    sources = list(sources)
    if len(sources) != 3:
        raise ValueError("the PRNG chain combines exactly three sources")
    blocks = []
    for src in sources:
        try:
            blocks.append(src.read(BLOCK))
        except SourceUnavailable:
            raise
        except Exception as exc:  # a broken source must stop the pulse, never weaken it
            raise SourceUnavailable(f"{getattr(src, 'name', src)}: {exc}") from exc
    return combine_sources(*blocks), {"sources": [getattr(s, "name", "?") for s in sources]}
