"""Reed-Solomon then Hadamard one-bit extractor over GF(2^s), s = ceil(w/2)."""
from __future__ import annotations

import numba
import numpy as np

from .gf2 import bits_to_int, irreducible, mulmod


def split_seed_block(block) -> tuple[int, int, int]:
    """(s, point, mask) from a w-bit seed block, MSB-first.

    The point takes the first s bits, the mask the remaining w - s bits
    followed by the last seed bit once more, so that both are s bits wide.
    """
    bits = [int(b) & 1 for b in block]
    w = len(bits)
    s = (w + 1) // 2
    point = bits_to_int(bits[:s])
    mask_bits = bits[s:] + [bits[-1]] * (2 * s - w)
    return s, point, bits_to_int(mask_bits)


def coefficients(x, s: int) -> list[int]:
    """Chunk the bit string into s-bit field elements, first chunk = constant term."""
    bits = [int(b) & 1 for b in x]
    bits += [0] * (-len(bits) % s)
    return [bits_to_int(bits[j : j + s]) for j in range(0, len(bits), s)]


def rsh_bit(x, seed_block) -> int:
    """One output bit: parity(mask & P_x(point)) in GF(2^s)."""
    s, point, mask = split_seed_block(seed_block)
    f = irreducible(s)
    acc = 0
    for c in reversed(coefficients(x, s)):
        acc = mulmod(acc, point, f) ^ c
    return bin(acc & mask).count("1") & 1


# -- bulk evaluation ---------------------------------------------------------

def _words(value: int, nw: int) -> np.ndarray:
    return np.array([(value >> (64 * i)) & 0xFFFFFFFFFFFFFFFF for i in range(nw)], dtype=np.uint64)


def coefficient_words(x_bits: np.ndarray, s: int) -> np.ndarray:
    """(ncoef, nw) little-endian word form of ``coefficients(x, s)``."""
    x_bits = np.asarray(x_bits, dtype=np.uint8) & 1
    ncoef = max(1, -(-x_bits.size // s))
    nw = -(-s // 64)
    padded = np.zeros(ncoef * s, dtype=np.uint8)
    padded[: x_bits.size] = x_bits
    # MSB-first chunks -> bit k of the element is chunk position s-1-k
    lsb = padded.reshape(ncoef, s)[:, ::-1]
    full = np.zeros((ncoef, nw * 64), dtype=np.uint8)
    full[:, :s] = lsb
    packed = np.packbits(full, axis=1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u8").astype(np.uint64).reshape(ncoef, nw)


@numba.njit(cache=True)
def _times_x(v, f, s):
    nw = v.shape[0]
    carry = np.uint64(0)
    for i in range(nw):
        nxt = v[i] >> np.uint64(63)
        v[i] = (v[i] << np.uint64(1)) | carry
        carry = nxt
    top_word = s // 64
    top_bit = np.uint64(s % 64)
    if top_word < nw:
        if (v[top_word] >> top_bit) & np.uint64(1):
            for i in range(nw):
                v[i] ^= f[i]
    elif carry:
        for i in range(nw):
            v[i] ^= f[i]


@numba.njit(cache=True)
def _window_tables(point, f, s, nwin):
    """T[k, b] = point * (b << 8k) mod f."""
    nw = point.shape[0]
    T = np.zeros((nwin, 256, nw), dtype=np.uint64)
    cur = point.copy()  # point * x^bit
    for k in range(nwin):
        for bit in range(8):
            if 8 * k + bit >= s:
                break
            step = 1 << bit
            for b in range(step, 2 * step):
                for i in range(nw):
                    T[k, b, i] = T[k, b - step, i] ^ cur[i]
            _times_x(cur, f, s)
    return T


@numba.njit(cache=True)
def _horner_parity(coef, T, mask, nwin):
    nw = coef.shape[1]
    acc = np.zeros(nw, dtype=np.uint64)
    nxt = np.zeros(nw, dtype=np.uint64)
    for j in range(coef.shape[0] - 1, -1, -1):
        for i in range(nw):
            nxt[i] = coef[j, i]
        for k in range(nwin):
            b = (acc[k >> 3] >> np.uint64(8 * (k & 7))) & np.uint64(0xFF)
            if b:
                for i in range(nw):
                    nxt[i] ^= T[k, b, i]
        for i in range(nw):
            acc[i] = nxt[i]
    par = np.uint64(0)
    for i in range(nw):
        par ^= acc[i] & mask[i]
    out = 0
    while par:
        out ^= 1
        par &= par - np.uint64(1)
    return out


def rsh_bits_bulk(coef: np.ndarray, s: int, blocks: np.ndarray) -> np.ndarray:
    """rsh_bit for one input against each row of ``blocks`` (seed bits)."""
    nw = coef.shape[1]
    nwin = -(-s // 8)
    f = _words(irreducible(s), nw)  # bit s falls off the top when 64 | s
    out = np.empty(blocks.shape[0], dtype=np.uint8)
    for i, block in enumerate(blocks):
        _, point, mask = split_seed_block(block)
        T = _window_tables(_words(point, nw), f, s, nwin)
        out[i] = _horner_parity(coef, T, _words(mask, nw), nwin)
    return out
