"""Binary field GF(2^s) with elements as Python ints (bit i = coefficient of x^i)."""
from __future__ import annotations

from functools import lru_cache


def clmul(a: int, b: int) -> int:
    """Carry-less product of two GF(2)[x] polynomials."""
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


def poly_mod(a: int, f: int) -> int:
    df = f.bit_length() - 1
    while a.bit_length() - 1 >= df:
        a ^= f << (a.bit_length() - 1 - df)
    return a


def poly_gcd(a: int, b: int) -> int:
    while b:
        a, b = b, poly_mod(a, b)
    return a


def mulmod(a: int, b: int, f: int) -> int:
    """a*b mod f, interleaving reduction with the shift-and-add loop."""
    df = f.bit_length() - 1
    top = 1 << df
    out = 0
    while b:
        if b & 1:
            out ^= a
        b >>= 1
        a <<= 1
        if a & top:
            a ^= f
    return out


def is_irreducible(f: int) -> bool:
    """Ben-Or test: gcd(f, x^(2^i) - x) = 1 for i = 1 .. deg/2."""
    d = f.bit_length() - 1
    if d < 1:
        return False
    if d == 1:
        return True
    if not f & 1:
        return False
    x = 2
    power = x
    for _ in range(d // 2):
        power = mulmod(power, power, f)
        if poly_gcd(f, power ^ x) != 1:
            return False
    return True


@lru_cache(maxsize=None)
def irreducible(s: int) -> int:
    """Lexicographically first irreducible polynomial of degree ``s``.

    Candidates ``x^s + g(x)`` are scanned in increasing order of ``g`` read as
    an integer, which orders coefficient vectors from the top degree down.
    """
    if s < 1:
        raise ValueError("degree must be positive")
    if s == 1:
        return 0b10
    base = 1 << s
    for g in range(1, 1 << s):
        if is_irreducible(base | g):
            return base | g
    raise ArithmeticError(f"no irreducible polynomial of degree {s}")  # unreachable


def bits_to_int(bits) -> int:
    """MSB-first bit sequence to integer."""
    out = 0
    for b in bits:
        out = (out << 1) | (int(b) & 1)
    return out
