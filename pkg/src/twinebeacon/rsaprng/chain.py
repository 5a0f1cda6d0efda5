"""Chain primes p = 2 a1 p1 + 1, p1 = 2 a2 p2 + 1 with large prime factors."""
from __future__ import annotations

import secrets
from dataclasses import dataclass
from fractions import Fraction

import gmpy2

from ..errors import GenerationTimeout
from .numtheory import TOY_LIMIT, is_probable_prime, sieve_passes


@dataclass(frozen=True)
class PrimeChainSpec:
    total_bits: int
    frac1: float = 0.75  # p1 > p^frac1
    frac2: float = 2 / 3  # p2 > p1^frac2

    def __post_init__(self):
        if not (0.5 < self.frac1 < 1 and 0.5 < self.frac2 < 1):
            raise ValueError("fractions must lie in (1/2, 1)")
        if self.total_bits < 5:
            raise ValueError("need at least 5 bits")

    @property
    def p1_bits(self) -> int:
        return -(-self.total_bits * Fraction(self.frac1).limit_denominator(1000) // 1)

    @property
    def p2_bits(self) -> int:
        return -(-self.p1_bits * Fraction(self.frac2).limit_denominator(1000) // 1)


def exceeds_power(a: int, b: int, frac: float) -> bool:
    """a > b^frac, exactly, for rational ``frac``."""
    q = Fraction(frac).limit_denominator(1000)
    return a**q.denominator > b**q.numerator


def power_cap(a: int, frac: float) -> int:
    """Largest b with a > b^frac."""
    q = Fraction(frac).limit_denominator(1000)
    root, exact = gmpy2.iroot(gmpy2.mpz(a) ** q.denominator, q.numerator)
    return int(root) - 1 if exact else int(root)


def _is_prime(n: int, rng) -> bool:
    # cheap screen first; the full round count only for survivors
    if not sieve_passes(n):
        return False
    if n < TOY_LIMIT:
        return is_probable_prime(n)
    return is_probable_prime(n, rounds=1, rng=rng) and is_probable_prime(n, rounds=128, rng=rng)


def power_floor(b: int, frac: float) -> int:
    """Smallest a with a > b^frac."""
    q = Fraction(frac).limit_denominator(1000)
    return int(gmpy2.iroot(gmpy2.mpz(b) ** q.numerator, q.denominator)[0]) + 1


def random_prime(bits: int, rng, attempts: int = 100_000, lo: int | None = None, hi: int | None = None) -> int:
    """Random prime in [max(2^(bits-1), lo), hi), with hi = 2^bits by default."""
    hi = hi or 1 << bits
    lo = max(1 << (bits - 1), lo or 0)
    if lo >= hi:
        raise GenerationTimeout(f"empty prime range [{lo}, {hi})")
    for _ in range(attempts):
        n = rng.randrange(lo, hi) | 1
        if n < hi and _is_prime(n, rng):
            return n
    raise GenerationTimeout(f"no {bits}-bit prime found")


def _cofactor_prime(q: int, lo: int, hi: int, rng, attempts: int) -> tuple[int, int] | None:
    """Random a with 2 a q + 1 a prime in [lo, hi]."""
    a_lo = max(1, -(-(lo - 1) // (2 * q)))
    a_hi = (hi - 1) // (2 * q)
    if a_hi < a_lo:
        return None
    for _ in range(attempts):
        a = rng.randint(a_lo, a_hi)
        p = 2 * a * q + 1
        if _is_prime(p, rng):
            return a, p
    return None


def gen_chain_prime(spec: PrimeChainSpec, rng=None, max_attempts: int = 200):
    """(p, p1, p2, a1, a2) with p = 2 a1 p1 + 1, p1 = 2 a2 p2 + 1, all prime.

    p2 is drawn large enough that some admissible p1 clears the
    p2 > p1^frac2 bound, and likewise for p1 against p, so each cofactor
    search runs over a range where every candidate meets the size bounds.
    p1 and p2 may run one bit past their nominal lengths, which small
    sizes need to have any solutions at all.
    """
    rng = rng or secrets.SystemRandom()
    b, b1, b2 = spec.total_bits, spec.p1_bits, spec.p2_bits
    p1_lo = max(1 << (b1 - 1), power_floor(1 << (b - 1), spec.frac1))
    p2_lo = power_floor(p1_lo, spec.frac2)
    if p1_lo >= 1 << (b1 + 1) or p2_lo >= 1 << (b2 + 1):
        raise GenerationTimeout(f"no chain shape fits {b} bits")
    tries = max(64, 4 * b)
    for _ in range(max_attempts):
        p2 = random_prime(b2, rng, lo=p2_lo, hi=1 << (b2 + 1))
        got = _cofactor_prime(p2, p1_lo, min((1 << (b1 + 1)) - 1, power_cap(p2, spec.frac2)), rng, tries)
        if got is None:
            continue
        a2, p1 = got
        got = _cofactor_prime(p1, 1 << (b - 1), min((1 << b) - 1, power_cap(p1, spec.frac1)), rng, tries)
        if got is None:
            continue
        a1, p = got
        if exceeds_power(p2, p1, spec.frac2) and exceeds_power(p1, p, spec.frac1):
            return p, p1, p2, a1, a2
    raise GenerationTimeout(f"no {b}-bit chain prime after {max_attempts} attempts")
