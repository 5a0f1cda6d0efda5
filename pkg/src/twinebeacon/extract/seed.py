"""Seed expansion from a 512-bit external pulse."""
from __future__ import annotations

import hashlib

import numpy as np


def pulse_bytes(pulse) -> bytes:
    """Accept 64 raw bytes, 128 hex characters or 512 bits."""
    if isinstance(pulse, str):
        pulse = bytes.fromhex(pulse)
    elif isinstance(pulse, np.ndarray) or isinstance(pulse, list):
        bits = np.asarray(pulse, dtype=np.uint8)
        if bits.size != 512:
            raise ValueError("a pulse is 512 bits")
        pulse = np.packbits(bits).tobytes()
    pulse = bytes(pulse)
    if len(pulse) != 64:
        raise ValueError("a pulse is 64 bytes")
    return pulse


def expand_seed(pulse, l: int) -> np.ndarray:
    """First ``l`` bits of SHAKE256(pulse), MSB-first within bytes."""
    data = hashlib.shake_256(pulse_bytes(pulse)).digest(-(-l // 8))
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))[:l]
