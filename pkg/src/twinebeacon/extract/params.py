"""Extractor parameter derivation: prime search and seed sizing."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from ..certify.entropy import entropy_threshold


def ceil_log2(q: Fraction) -> int:
    """Smallest integer t with 2^t >= q, for rational q > 0."""
    if q <= 0:
        raise ValueError("argument must be positive")
    t = q.numerator.bit_length() - q.denominator.bit_length()
    # now 2^(t-1) < q < 2^(t+1); settle the boundary exactly
    while Fraction(2) ** t < q:
        t += 1
    while Fraction(2) ** (t - 1) >= q:
        t -= 1
    return t


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def prime_bound(m: int, k: int, eps: float) -> int:
    """2 * ceil(log2(4 m k^2 / eps^2)), evaluated exactly on the float ``eps``."""
    e = Fraction(eps)
    return 2 * ceil_log2(Fraction(4 * m * k * k) / (e * e))


def find_prime(m: int, k: int, eps: float) -> int:
    """Smallest prime strictly above ``prime_bound(m, k, eps)``."""
    if m < 1 or k < 1 or not 0 < eps < 1:
        raise ValueError("need m, k >= 1 and 0 < eps < 1")
    w = prime_bound(m, k, eps) + 1
    while not is_prime(w):
        w += 1
    return w


def seed_blocks(w: int, sigma: int) -> int:
    """Number r of w^2-bit design blocks, floored at 2."""
    e = math.e
    if w < 3:
        raise ValueError("w must be at least 3")
    if sigma - e <= 1:
        return 2
    ratio = (math.log2(sigma - e) - math.log2(w - e)) / (math.log2(e) - math.log2(e - 1))
    return max(2, 1 + math.ceil(ratio))


def seed_length(w: int, sigma: int) -> tuple[int, int]:
    r = seed_blocks(w, sigma)
    return r, r * w * w


@dataclass(frozen=True)
class ExtractorParams:
    m: int
    k: float
    sigma: int
    eps_x: float
    w: int
    r: int
    l: int

    @classmethod
    def derive(cls, m: int, sigma: int, eps_x: float, k: float | None = None) -> "ExtractorParams":
        w = find_prime(m, sigma, eps_x)
        r, l = seed_length(w, sigma)
        return cls(m, entropy_threshold(sigma, eps_x) if k is None else k, sigma, eps_x, w, r, l)

    @property
    def field_bits(self) -> int:
        return (self.w + 1) // 2

    @property
    def threshold(self) -> int:
        return entropy_threshold(self.sigma, self.eps_x)
